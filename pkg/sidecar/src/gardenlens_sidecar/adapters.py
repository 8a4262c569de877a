"""Model-mode adapters around community checkpoints.

These wrap whatever local checkpoints the operator points the config
at; the test suite never loads them. Expected layouts:

- segmentation: a `transformers` semantic-segmentation model directory
  (150-class, ADE20K-style label space), e.g. a SegFormer checkpoint.
- classification: a torchvision-compatible ResNet50 state dict trained
  on the 365-scene label space, stored as `model.pth` next to an
  optional `categories.txt` (falls back to the shipped label table).
- sentiment: a `transformers` text-classification model directory whose
  labels order from negative to positive (star-rating heads work).

Everything imports lazily so stub mode stays dependency-free.
"""

from __future__ import annotations

from pathlib import Path

from .stub import scene_attributes, scene_labels


def _encode_rle(flat) -> list[list[int]]:
    runs: list[list[int]] = []
    for value in flat:
        value = int(value)
        if runs and runs[-1][0] == value:
            runs[-1][1] += 1
        else:
            runs.append([value, 1])
    return runs


class ModelEngine:
    def __init__(self, config):
        import torch  # deferred: only model mode needs it

        self._torch = torch
        self._seg = self._load_segmentation(config.segmentation_model)
        self._cls = self._load_classification(config.classification_model)
        self._sent = self._load_sentiment(config.sentiment_model)

    # --- loading -------------------------------------------------------------

    def _load_segmentation(self, path: str):
        from transformers import (AutoImageProcessor,
                                  AutoModelForSemanticSegmentation)

        processor = AutoImageProcessor.from_pretrained(path)
        model = AutoModelForSemanticSegmentation.from_pretrained(path).eval()
        return processor, model

    def _load_classification(self, path: str):
        import torchvision

        model = torchvision.models.resnet50(num_classes=365)
        state = self._torch.load(Path(path) / "model.pth", map_location="cpu")
        model.load_state_dict(state)
        model.eval()
        categories_file = Path(path) / "categories.txt"
        if categories_file.exists():
            labels = tuple(line.strip() for line in
                           categories_file.read_text(encoding="utf-8").splitlines()
                           if line.strip())
        else:
            labels = scene_labels()
        return model, labels

    def _load_sentiment(self, path: str):
        from transformers import pipeline

        return pipeline("text-classification", model=path, top_k=None)

    # --- ops -----------------------------------------------------------------

    def _load_image(self, image: str):
        import base64
        import io

        from PIL import Image

        if Path(image).exists():
            return Image.open(image).convert("RGB")
        return Image.open(io.BytesIO(base64.b64decode(image))).convert("RGB")

    def segment(self, ident: str, image: str) -> dict:
        processor, model = self._seg
        pil = self._load_image(image)
        with self._torch.no_grad():
            inputs = processor(images=pil, return_tensors="pt")
            outputs = model(**inputs)
        mask = processor.post_process_semantic_segmentation(
            outputs, target_sizes=[pil.size[::-1]])[0]
        height, width = mask.shape
        return {"rle": _encode_rle(mask.reshape(-1).tolist()), "w": int(width), "h": int(height)}

    def classify(self, ident: str, image: str) -> dict:
        import torchvision.transforms as T

        model, labels = self._cls
        pil = self._load_image(image)
        transform = T.Compose([
            T.Resize(256), T.CenterCrop(224), T.ToTensor(),
            T.Normalize(mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]),
        ])
        with self._torch.no_grad():
            logits = model(transform(pil).unsqueeze(0))
            probs = self._torch.softmax(logits, dim=1)[0]
        weights, indices = probs.topk(4)
        pairs = sorted(
            ([labels[int(i)], round(float(w), 6)] for w, i in zip(weights, indices)),
            key=lambda pair: (-pair[1], pair[0]))
        # attribute heads are model-specific; default to the shared vocabulary
        keywords = list(scene_attributes()[:3])
        return {"labels": pairs, "keywords": keywords}

    def sentiment(self, ident: str, text: str) -> float:
        scores = self._sent(text[:2000])[0]
        ordered = sorted(scores, key=lambda s: s["label"])
        if len(ordered) == 1:
            return round(float(ordered[0]["score"]), 6)
        # expectation over label ranks, scaled into [0, 1]
        total = sum(s["score"] for s in ordered)
        expectation = sum(i * s["score"] for i, s in enumerate(ordered)) / total
        return round(expectation / (len(ordered) - 1), 6)
