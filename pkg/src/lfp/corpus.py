"""Run manifests and the content-addressed artifact store.

Every pipeline stage persists its output here as one file per
(run_id, stage, talk_id, variant) key, with a JSON sidecar recording the
SHA-256 of the payload.  That makes runs resumable and every intermediate
inspectable with ordinary shell tools.
"""

import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

STAGES = (
    "vad",
    "segments",
    "asr",
    "fusion",
    "document",
    "sentences",
    "mt",
    "ape",
    "qa",
    "summary",
    "scores",
)

_KEY_PART = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class ManifestError(ValueError):
    """Raised when a manifest file cannot be parsed or validated."""


class ArtifactNotFoundError(KeyError):
    """Requested artifact key has no stored payload."""


class ArtifactConflictError(ValueError):
    """A key already holds different bytes and force was not set."""


class ArtifactIntegrityError(ValueError):
    """Stored payload does not match its recorded hash."""


@dataclass
class TalkRef:
    talk_id: str
    audio_path: str
    duration_s: float
    source_lang: str
    target_langs: list[str]

    def __post_init__(self):
        if not self.talk_id:
            raise ManifestError("talk_id must be non-empty")
        if self.duration_s <= 0:
            raise ManifestError(f"talk {self.talk_id!r}: duration_s must be > 0")


@dataclass
class RunManifest:
    run_id: str
    talks: list[TalkRef]
    config_hash: str = ""
    created_at: str = ""

    def __post_init__(self):
        if not self.talks:
            raise ManifestError("manifest has no talks")
        if not self.created_at:
            self.created_at = utc_now_iso()


@dataclass(frozen=True)
class ArtifactKey:
    run_id: str
    stage: str
    talk_id: str
    variant: str

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        for name, part in (
            ("run_id", self.run_id),
            ("talk_id", self.talk_id),
            ("variant", self.variant),
        ):
            if not _KEY_PART.match(part):
                raise ValueError(f"invalid {name} {part!r} in artifact key")

    def __str__(self) -> str:
        return f"{self.run_id}/{self.stage}/{self.talk_id}/{self.variant}"


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def sha256_hex(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


_REQUIRED_TALK_FIELDS = ("talk_id", "audio_path", "duration_s", "source_lang", "target_langs")


def load_manifest(path, run_id: str | None = None) -> RunManifest:
    """Load a JSONL manifest (one talk object per line).

    The run_id, when not supplied, is derived from the file content so that
    re-running the same manifest resumes the same artifact namespace.
    """
    path = Path(path)
    raw = path.read_bytes()
    if run_id is None:
        run_id = "run-" + hashlib.sha256(raw).hexdigest()[:12]

    talks: list[TalkRef] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ManifestError(f"{path}: line {lineno}: talk entry must be a JSON object")
        for fld in _REQUIRED_TALK_FIELDS:
            if fld not in obj:
                raise ManifestError(f"{path}: line {lineno}: missing field {fld!r}")
        talk_id = str(obj["talk_id"])
        if talk_id in seen:
            raise ManifestError(
                f"{path}: duplicate talk_id {talk_id!r} on lines {seen[talk_id]} and {lineno}"
            )
        seen[talk_id] = lineno
        talks.append(
            TalkRef(
                talk_id=talk_id,
                audio_path=str(obj["audio_path"]),
                duration_s=float(obj["duration_s"]),
                source_lang=str(obj["source_lang"]),
                target_langs=[str(t) for t in obj["target_langs"]],
            )
        )
    return RunManifest(run_id=run_id, talks=talks)


def dumps_jsonl(records) -> bytes:
    """Deterministic JSONL serialization (sorted keys, stable floats)."""
    lines = [json.dumps(rec, sort_keys=True, ensure_ascii=False) for rec in records]
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


def loads_jsonl(payload: bytes) -> list[dict]:
    return [json.loads(line) for line in payload.decode("utf-8").splitlines() if line.strip()]


class ArtifactStore:
    """One file per artifact under root/run_id/stage/talk_id/variant.

    A sidecar ``<variant>.meta.json`` records the payload hash; reads verify
    it.  Concurrent reads are safe, writes to distinct keys are safe, and a
    write-write on the same key relies on the single-writer contract.
    """

    def __init__(self, root):
        self.root = Path(root)

    def _payload_path(self, key: ArtifactKey) -> Path:
        return self.root / key.run_id / key.stage / key.talk_id / key.variant

    def _sidecar_path(self, key: ArtifactKey) -> Path:
        return self._payload_path(key).with_name(key.variant + ".meta.json")

    def has(self, key: ArtifactKey) -> bool:
        return self._payload_path(key).exists() and self._sidecar_path(key).exists()

    def put(self, key: ArtifactKey, payload: bytes, force: bool = False) -> str:
        """Store payload, returning its hex digest.

        Re-putting identical bytes is an idempotent no-op; different bytes
        under the same key raise ArtifactConflictError unless ``force``.
        """
        digest = sha256_hex(payload)
        target = self._payload_path(key)
        if target.exists():
            existing = sha256_hex(target.read_bytes())
            if existing == digest:
                return digest
            if not force:
                raise ArtifactConflictError(
                    f"artifact {key} already holds different content "
                    f"(stored {existing[:12]}, new {digest[:12]}); pass force to overwrite"
                )
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_bytes(payload)
        os.replace(tmp, target)
        sidecar = {"hash": digest, "stage": key.stage, "created_at": utc_now_iso()}
        side_tmp = self._sidecar_path(key).with_name(key.variant + ".meta.json.tmp")
        side_tmp.write_text(json.dumps(sidecar, sort_keys=True), encoding="utf-8")
        os.replace(side_tmp, self._sidecar_path(key))
        return digest

    def get(self, key: ArtifactKey) -> bytes:
        target = self._payload_path(key)
        if not target.exists():
            raise ArtifactNotFoundError(str(key))
        payload = target.read_bytes()
        sidecar_path = self._sidecar_path(key)
        if not sidecar_path.exists():
            raise ArtifactIntegrityError(f"artifact {key}: sidecar missing, cannot verify")
        recorded = json.loads(sidecar_path.read_text(encoding="utf-8")).get("hash")
        actual = sha256_hex(payload)
        if recorded != actual:
            raise ArtifactIntegrityError(
                f"artifact {key}: payload hash {actual[:12]} != recorded {str(recorded)[:12]}"
            )
        return payload
