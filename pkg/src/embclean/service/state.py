"""Review-session state: rankings, the confirmation log, and live statistics.

All served numbers are pure functions of the ranking files and the
append-only confirmation log, so a restart (which replays the log) never
changes any statistic.  Confirmation writes go through a single lock and
are fsynced before they are acknowledged.
"""

from __future__ import annotations

import json
import os
import threading

import numpy as np

from ..bench import mann_whitney_one_sided
from ..errors import InputError
from ..io import Ranking

HEAD_SIZE = 50
WINDOW = 10
BASELINE_SIZE = 50


def _canon_key(key):
    if isinstance(key, (list, tuple)):
        return (int(key[0]), int(key[1]))
    return int(key)


def _json_key(key):
    return list(key) if isinstance(key, tuple) else key


class ReviewState:
    def __init__(self, rankings: dict[str, Ranking], state_dir, media_root=None,
                 baseline_seed: int = 0):
        self.rankings = dict(rankings)
        self.state_dir = os.fspath(state_dir)
        os.makedirs(self.state_dir, exist_ok=True)
        self.media_root = os.fspath(media_root) if media_root else None
        self.baseline_seed = baseline_seed
        self.manifest = self._load_manifest()
        # rank of each key, 1-based, per issue
        self._rank_of = {}
        for issue, r in self.rankings.items():
            keys = (
                [tuple(k) for k in r.keys.tolist()]
                if r.is_pairs
                else r.keys.tolist()
            )
            self._rank_of[issue] = {k: i + 1 for i, k in enumerate(keys)}
        self.log_path = os.path.join(self.state_dir, "confirmations.jsonl")
        self._lock = threading.Lock()
        self.records: list[dict] = []
        self._replay_log()
        self._baselines: dict[str, list] = {}

    # -- confirmation log ---------------------------------------------------

    def _replay_log(self):
        if not os.path.exists(self.log_path):
            return
        with open(self.log_path, "r", encoding="utf-8") as f:
            for lineno, ln in enumerate(f, start=1):
                ln = ln.strip()
                if not ln:
                    continue
                try:
                    rec = json.loads(ln)
                except json.JSONDecodeError as exc:
                    raise InputError(
                        f"{self.log_path}:{lineno}: corrupt confirmation log"
                    ) from exc
                self.records.append(rec)

    def append_confirmation(self, issue_type, key, verdict, annotator, timestamp_ms):
        if issue_type not in self.rankings:
            raise KeyError(issue_type)
        key = _canon_key(key)
        if key not in self._rank_of[issue_type]:
            raise InputError(f"key {key} is not a ranked {issue_type} candidate")
        record = {
            "issue_type": issue_type,
            "key": _json_key(key),
            "verdict": verdict,
            "annotator": annotator,
            "timestamp": int(timestamp_ms),
        }
        line = json.dumps(record) + "\n"
        with self._lock:
            with open(self.log_path, "a", encoding="utf-8") as f:
                f.write(line)
                f.flush()
                os.fsync(f.fileno())
            self.records.append(record)
        return record

    def _snapshot(self, issue_type):
        with self._lock:
            upto = len(self.records)
        return [r for r in self.records[:upto] if r["issue_type"] == issue_type]

    # -- verdict aggregation ------------------------------------------------

    @staticmethod
    def _aggregate(records):
        """Majority verdict per key from each annotator's latest record."""
        latest = {}
        for rec in records:
            latest[(tuple(rec["key"]) if isinstance(rec["key"], list) else rec["key"],
                    rec["annotator"])] = rec["verdict"]
        votes = {}
        for (key, _), verdict in latest.items():
            c, r = votes.get(key, (0, 0))
            votes[key] = (c + (verdict == "confirmed"), r + (verdict == "rejected"))
        out = {}
        for key, (c, r) in votes.items():
            out[key] = "confirmed" if c > r else ("rejected" if r > c else "unresolved")
        return out

    def verdicts(self, issue_type):
        return self._aggregate(self._snapshot(issue_type))

    # -- pages ----------------------------------------------------------------

    def ranking_info(self):
        out = []
        for issue, r in sorted(self.rankings.items()):
            out.append(
                {
                    "issue_type": issue,
                    "total_candidates": int(r.total_candidates),
                    "listed": len(r),
                    "truncated": bool(r.truncated),
                }
            )
        return out

    def page(self, issue_type, offset, limit):
        r = self.rankings[issue_type]
        verdicts = self.verdicts(issue_type)
        entries = []
        for pos in range(offset, min(offset + limit, len(r))):
            if r.is_pairs:
                key = (int(r.keys[pos, 0]), int(r.keys[pos, 1]))
                media = [self.media_ref(key[0]), self.media_ref(key[1])]
            else:
                key = int(r.keys[pos])
                media = [self.media_ref(key)]
            entries.append(
                {
                    "rank": pos + 1,
                    "key": _json_key(key),
                    "score": float(r.scores[pos]),
                    "media": media,
                    "verdict": verdicts.get(key),
                }
            )
        return entries

    # -- media ----------------------------------------------------------------

    def _load_manifest(self):
        if not self.media_root:
            return None
        path = os.path.join(self.media_root, "manifest.json")
        if not os.path.exists(path):
            return None
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        if isinstance(raw, list):
            return {i: p for i, p in enumerate(raw)}
        return {int(k): v for k, v in raw.items()}

    def media_ref(self, index: int):
        if self.manifest and index in self.manifest:
            return f"/api/media/{index}"
        return None

    def media_path(self, index: int):
        if not self.manifest or index not in self.manifest:
            return None
        root = os.path.realpath(self.media_root)
        path = os.path.realpath(os.path.join(root, self.manifest[index]))
        if not path.startswith(root + os.sep):
            raise InputError(f"media path for {index} escapes the media root")
        return path

    # -- baseline ---------------------------------------------------------------

    def baseline_keys(self, issue_type):
        """Random candidates for the head-vs-random comparison.

        Drawn once per issue with a recorded seed and persisted, so the
        comparison is reproducible across restarts.
        """
        if issue_type in self._baselines:
            return self._baselines[issue_type]
        path = os.path.join(self.state_dir, f"baseline_{issue_type}.json")
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as f:
                blob = json.load(f)
            keys = [_canon_key(k) for k in blob["keys"]]
        else:
            r = self.rankings[issue_type]
            head = set(range(min(HEAD_SIZE, len(r))))
            pool = [i for i in range(len(r)) if i not in head]
            rng = np.random.default_rng(self.baseline_seed)
            take = min(BASELINE_SIZE, len(pool))
            chosen = sorted(rng.choice(len(pool), size=take, replace=False).tolist()) if take else []
            if r.is_pairs:
                keys = [tuple(map(int, r.keys[pool[i]])) for i in chosen]
            else:
                keys = [int(r.keys[pool[i]]) for i in chosen]
            with open(path, "w", encoding="utf-8") as f:
                json.dump(
                    {"seed": self.baseline_seed, "keys": [_json_key(k) for k in keys]},
                    f,
                )
        self._baselines[issue_type] = keys
        return keys

    # -- statistics ---------------------------------------------------------------

    def stats(self, issue_type):
        records = self._snapshot(issue_type)
        if not records:
            raise LookupError("no confirmations yet")
        verdicts = self._aggregate(records)
        rank_of = self._rank_of[issue_type]
        reviewed = {k: v for k, v in verdicts.items()}
        by_rank = {rank_of[k]: v for k, v in reviewed.items()}
        max_rank = max(by_rank)
        confirmed_total = sum(1 for v in reviewed.values() if v == "confirmed")

        windows = []
        for start in range(1, max(max_rank - WINDOW + 1, 0) + 1):
            seen = [by_rank[r] for r in range(start, start + WINDOW) if r in by_rank]
            n_rev = len(seen)
            n_conf = sum(1 for v in seen if v == "confirmed")
            windows.append(
                {
                    "start_rank": start,
                    "reviewed": n_rev,
                    "confirmed": n_conf,
                    "fraction": (n_conf / n_rev) if n_rev else None,
                }
            )

        baseline = self.baseline_keys(issue_type)
        baseline_set = set(baseline)
        head_outcomes = [
            1 if v == "confirmed" else 0
            for k, v in reviewed.items()
            if rank_of[k] <= HEAD_SIZE and v != "unresolved"
        ]
        base_outcomes = [
            1 if v == "confirmed" else 0
            for k, v in reviewed.items()
            if k in baseline_set and v != "unresolved"
        ]
        p_value = None
        if head_outcomes and base_outcomes:
            p_value = mann_whitney_one_sided(head_outcomes, base_outcomes)

        point = self.threshold(issue_type, max_rank, _records=records)
        return {
            "issue_type": issue_type,
            "reviewed": len(reviewed),
            "confirmed": confirmed_total,
            "max_reviewed_rank": max_rank,
            "windows": windows,
            "precision": point["precision"],
            "fe": point["fe"],
            "p_value": p_value,
            "head_outcomes": len(head_outcomes),
            "baseline_outcomes": len(base_outcomes),
            "baseline_keys": [_json_key(k) for k in baseline],
        }

    def threshold(self, issue_type, rank, _records=None):
        """Precision and focused-effort estimates at a rank threshold.

        Recall is proxied by the share of all confirmed issues found within
        the threshold, so FE = rank / (recall * total candidates).
        """
        records = self._records_or(issue_type, _records)
        verdicts = self._aggregate(records)
        rank_of = self._rank_of[issue_type]
        total = self.rankings[issue_type].total_candidates
        in_head = {k: v for k, v in verdicts.items() if rank_of[k] <= rank}
        reviewed = len(in_head)
        confirmed = sum(1 for v in in_head.values() if v == "confirmed")
        confirmed_all = sum(1 for v in verdicts.values() if v == "confirmed")
        precision = confirmed / reviewed if reviewed else None
        fe = None
        if confirmed and confirmed_all:
            recall = confirmed / confirmed_all
            fe = rank / (recall * total)
        return {
            "issue_type": issue_type,
            "rank": rank,
            "reviewed": reviewed,
            "confirmed": confirmed,
            "precision": precision,
            "fe": fe,
        }

    def _records_or(self, issue_type, records):
        if records is not None:
            return records
        return self._snapshot(issue_type)
