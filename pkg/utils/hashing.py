import hashlib
import json


def canonicalJson(document) -> str:
    return json.dumps(document, sort_keys = True, separators = (",", ":"), ensure_ascii = True)


def sha256Text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256File(path: str, chunkSize: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunkSize), b""):
            digest.update(chunk)
    return digest.hexdigest()
