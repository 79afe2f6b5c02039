/// Longest repeated phrase considered, in words.
pub const MAX_NGRAM: usize = 5;

fn norm(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Collapses immediately repeated n-grams (n = 5 down to 1) to a single
/// occurrence until no repeat is left. Comparison ignores case and edge
/// punctuation; the first occurrence is kept verbatim.
///
/// "a cat a cat a cat on a mat" → "a cat on a mat".
pub fn collapse_repeats(text: &str) -> String {
    let mut tokens: Vec<&str> = text.split_whitespace().collect();
    let mut keys: Vec<String> = tokens.iter().map(|t| norm(t)).collect();
    loop {
        let mut changed = false;
        for n in (1..=MAX_NGRAM).rev() {
            let mut i = 0;
            while i + 2 * n <= tokens.len() {
                let repeated = keys[i..i + n] == keys[i + n..i + 2 * n]
                    && keys[i..i + n].iter().any(|k| !k.is_empty());
                if repeated {
                    tokens.drain(i + n..i + 2 * n);
                    keys.drain(i + n..i + 2 * n);
                    changed = true;
                } else {
                    i += 1;
                }
            }
        }
        if !changed {
            break;
        }
    }
    tokens.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(collapse_repeats("a cat a cat a cat on a mat"), "a cat on a mat");
        assert_eq!(collapse_repeats("blue blue sky"), "blue sky");
        assert_eq!(collapse_repeats("A man, a man walking"), "A man, walking");
        assert_eq!(collapse_repeats("x y y x y"), "x y");
        assert_eq!(collapse_repeats(""), "");
        assert_eq!(collapse_repeats("no repeats here"), "no repeats here");
    }

    fn repeated_phrases() -> impl Strategy<Value = String> {
        let word = prop::sample::select(vec!["a", "cat", "on", "the", "mat", "blue", "sky", "dog"]);
        let phrase = prop::collection::vec(word, 1..4);
        prop::collection::vec((phrase, 1usize..4), 1..6).prop_map(|parts| {
            parts
                .into_iter()
                .flat_map(|(p, reps)| std::iter::repeat_n(p.join(" "), reps))
                .collect::<Vec<_>>()
                .join(" ")
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn idempotent_and_non_increasing(s in repeated_phrases()) {
            let once = collapse_repeats(&s);
            prop_assert_eq!(collapse_repeats(&once), once.clone());
            prop_assert!(once.split_whitespace().count() <= s.split_whitespace().count());
        }
    }
}
