"""Trial persistence for live conduct: envelopes and a file-backed store.

One JSON file per trial in a state directory.  Every accepted mutation
bumps a monotone revision; writers declare the revision they read, and a
mismatch on disk refuses the write.  Files are replaced atomically
(write to a temp file in the same directory, then rename), so a crash
mid-write leaves the previous revision readable.
"""

from __future__ import annotations

import json
import os
import tempfile
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .core import TrialState


class StoreError(Exception):
    """Base class for persistence failures."""


class TrialNotFound(StoreError):
    def __init__(self, trial_id: str):
        super().__init__(f"no trial {trial_id!r} in the store")
        self.trial_id = trial_id


class RevisionConflict(StoreError):
    """The on-disk revision is not the one the writer read."""

    def __init__(self, trial_id: str, expected: int, found: int):
        super().__init__("state changed on disk: "
                         f"trial {trial_id!r} is at revision {found}, "
                         f"write expected {expected}")
        self.trial_id = trial_id
        self.expected = expected
        self.found = found


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class TrialEnvelope:
    """A persisted trial: state plus identity, revision, and timestamps.

    `revision` counts accepted mutations and doubles as the optimistic
    concurrency token: a save must present the revision it loaded.
    """

    trial_id: str
    state: TrialState
    revision: int = 0
    created_at: str = ""
    updated_at: str = ""

    def to_dict(self) -> dict:
        return {"trial_id": self.trial_id,
                "revision": self.revision,
                "created_at": self.created_at,
                "updated_at": self.updated_at,
                "state": self.state.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "TrialEnvelope":
        revision = int(d["revision"])
        if revision < 0:
            raise ValueError("revision must be >= 0")
        return cls(trial_id=str(d["trial_id"]),
                   state=TrialState.from_dict(d["state"]),
                   revision=revision,
                   created_at=d.get("created_at", ""),
                   updated_at=d.get("updated_at", ""))


class TrialStore:
    """File-per-trial JSON store with optimistic concurrency."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, trial_id: str) -> Path:
        if not trial_id or any(c in trial_id for c in "/\\") or \
                trial_id in (".", ".."):
            raise StoreError(f"invalid trial id {trial_id!r}")
        return self.root / f"{trial_id}.json"

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))

    def create(self, state: TrialState,
               trial_id: Optional[str] = None) -> TrialEnvelope:
        """Persist a new trial at revision 0; refuses an existing id."""
        trial_id = trial_id or uuid.uuid4().hex[:12]
        path = self.path(trial_id)
        if path.exists():
            raise StoreError(f"trial {trial_id!r} already exists")
        now = _now()
        env = TrialEnvelope(trial_id=trial_id, state=state, revision=0,
                            created_at=now, updated_at=now)
        self._write(path, env)
        return env

    def load(self, trial_id: str) -> TrialEnvelope:
        path = self.path(trial_id)
        try:
            with open(path, encoding="utf-8") as fh:
                return TrialEnvelope.from_dict(json.load(fh))
        except FileNotFoundError:
            raise TrialNotFound(trial_id) from None

    def save(self, env: TrialEnvelope) -> TrialEnvelope:
        """Persist a mutated envelope whose `revision` is the one loaded.

        Re-reads the file first: any revision drift since the load refuses
        the write, so two writers can never silently overwrite each other.
        Returns the envelope with the bumped revision.
        """
        current = self.load(env.trial_id)
        if current.revision != env.revision:
            raise RevisionConflict(env.trial_id, env.revision,
                                   current.revision)
        env.revision += 1
        env.updated_at = _now()
        if not env.created_at:
            env.created_at = current.created_at
        self._write(self.path(env.trial_id), env)
        return env

    def _write(self, path: Path, env: TrialEnvelope) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=path.stem,
                                   suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(env.to_dict(), fh, indent=1)
                fh.write("\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
