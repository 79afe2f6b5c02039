//! Linguistic similarity between caption pairs: TF-IDF cosine, word mover's
//! similarity, and two sentence-embedding cosines, over a shared
//! repeat-collapse and preprocessing step.

pub mod embedding;
pub mod preprocess;
pub mod repeats;
pub mod tfidf;
pub mod transport;
pub mod wmd;
pub mod word_vectors;

pub use embedding::{cosine, embedding_similarity, embedding_similarity_as, EmbeddingBackendId, HashEmbedder, SentenceEmbedder, SentenceEmbedding};
pub use preprocess::{preprocess, PreprocessError, StopWords, TokenizedSentence};
pub use repeats::collapse_repeats;
pub use tfidf::{tfidf_similarity, TfidfModel};
pub use wmd::{wmd_distance, wmd_similarity, WmdError};
pub use word_vectors::{WordVectorError, WordVectors};
