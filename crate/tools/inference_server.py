"""HTTP inference service for the real backends.

Serves the routes `seethrough-core`'s remote client calls. Every model is
loaded on first use and cached. Needs, beyond fastapi/uvicorn:

    pip install transformers diffusers sentence-transformers lpips tensorflow-hub

Run:  python tools/inference_server.py --port 8765
"""

import argparse
import base64
import functools
import io

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException
from PIL import Image
from pydantic import BaseModel

# model names accepted after "remote:" in a backends TOML
CAPTIONERS = {"blip-large": "Salesforce/blip-image-captioning-large"}
GENERATORS = {"lcm-sd15": ("runwayml/stable-diffusion-v1-5", "latent-consistency/lcm-lora-sdv1-5")}
SBERT = {"all-mpnet-base-v2": "sentence-transformers/all-mpnet-base-v2"}
USE_HUB = {"use": "https://tfhub.dev/google/universal-sentence-encoder/4"}
LPIPS_NETS = {"alex", "vgg", "squeeze", "vit"}

app = FastAPI()
device = "cpu"


def decode_png(b64):
    return Image.open(io.BytesIO(base64.b64decode(b64))).convert("RGB")


def encode_png(img):
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def lookup(table, name):
    if name not in table:
        raise HTTPException(404, f"unknown model {name!r}; known: {sorted(table)}")
    return table[name]


@functools.lru_cache(maxsize=None)
def captioner(name):
    from transformers import BlipForConditionalGeneration, BlipProcessor

    repo = lookup(CAPTIONERS, name)
    return BlipProcessor.from_pretrained(repo), BlipForConditionalGeneration.from_pretrained(repo).to(device)


@functools.lru_cache(maxsize=None)
def generator(name):
    import torch
    from diffusers import DiffusionPipeline, LCMScheduler

    base, lora = lookup(GENERATORS, name)
    pipe = DiffusionPipeline.from_pretrained(base, torch_dtype=torch.float32)
    pipe.scheduler = LCMScheduler.from_config(pipe.scheduler.config)
    pipe.load_lora_weights(lora)
    pipe.safety_checker = None
    return pipe.to(device)


@functools.lru_cache(maxsize=None)
def embedder(name):
    if name in USE_HUB:
        import tensorflow_hub as hub

        model = hub.load(USE_HUB[name])
        return lambda sents: np.asarray(model(sents)).tolist()
    from sentence_transformers import SentenceTransformer

    model = SentenceTransformer(lookup(SBERT, name), device=device)
    return lambda sents: model.encode(sents, convert_to_numpy=True).tolist()


@functools.lru_cache(maxsize=None)
def perceptual(net):
    if net not in LPIPS_NETS:
        raise HTTPException(404, f"unknown net {net!r}")
    if net == "vit":
        # transformer variant: LPIPS-style distance over DINO ViT token features
        import torch
        from transformers import ViTModel

        vit = ViTModel.from_pretrained("facebook/dino-vits16").to(device).eval()

        def dist(a, b):
            with torch.no_grad():
                fa = vit(pixel_values=a, output_hidden_states=True).hidden_states[1:]
                fb = vit(pixel_values=b, output_hidden_states=True).hidden_states[1:]
            per_layer = []
            for x, y in zip(fa, fb):
                x = torch.nn.functional.normalize(x, dim=-1)
                y = torch.nn.functional.normalize(y, dim=-1)
                per_layer.append(((x - y) ** 2).sum(-1).mean())
            return float(torch.stack(per_layer).mean())

        return dist, 224
    import lpips

    model = lpips.LPIPS(net=net).to(device)
    return (lambda a, b: float(model(a * 2 - 1, b * 2 - 1).item())), None


def to_tensor(img, size):
    import torch

    if size:
        img = img.resize((size, size), Image.BICUBIC)
    arr = np.asarray(img, dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0).to(device)


class CaptionReq(BaseModel):
    model: str
    image_png_b64: str
    min_words: int
    max_words: int


class GenerateReq(BaseModel):
    model: str
    prompt: str
    steps: int
    seed: int
    resolution: int


class EmbedReq(BaseModel):
    model: str
    sentences: list[str]


class LpipsReq(BaseModel):
    net: str
    a_png_b64: str
    b_png_b64: str


@app.get("/health")
def health():
    return {"status": "ok", "models": {
        "caption": sorted(CAPTIONERS), "generate": sorted(GENERATORS),
        "embed": sorted(SBERT) + sorted(USE_HUB), "lpips": sorted(LPIPS_NETS)}}


@app.post("/caption")
def caption(req: CaptionReq):
    processor, model = captioner(req.model)
    inputs = processor(images=decode_png(req.image_png_b64), return_tensors="pt").to(device)
    # roughly 1.3 tokens per word
    out = model.generate(**inputs, min_new_tokens=int(req.min_words * 1.3),
                         max_new_tokens=int(req.max_words * 1.3) + 4, num_beams=3)
    return {"caption": processor.decode(out[0], skip_special_tokens=True)}


@app.post("/generate")
def generate(req: GenerateReq):
    import torch

    pipe = generator(req.model)
    g = torch.Generator(device=device).manual_seed(req.seed % (2**63))
    img = pipe(req.prompt, num_inference_steps=req.steps, guidance_scale=1.0, generator=g,
               height=req.resolution, width=req.resolution).images[0]
    return {"image_png_b64": encode_png(img)}


@app.post("/embed")
def embed(req: EmbedReq):
    return {"embeddings": embedder(req.model)(req.sentences)}


@app.post("/lpips")
def lpips_route(req: LpipsReq):
    import torch

    dist, size = perceptual(req.net)
    with torch.no_grad():
        d = dist(to_tensor(decode_png(req.a_png_b64), size), to_tensor(decode_png(req.b_png_b64), size))
    return {"distance": d}


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--device", default="cpu")
    args = ap.parse_args()
    device = args.device
    uvicorn.run(app, host=args.host, port=args.port)
