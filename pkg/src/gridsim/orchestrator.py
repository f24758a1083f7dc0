"""Filesystem-coordinated campaigns of per-prefix shard jobs.

A campaign splits one truncated hybrid run into independent jobs, one per
retained prefix, executes them in worker processes, and folds the finished
shard files into a single amplitude batch.  The shard files are the only
coordination channel: a job counts as done exactly when its file exists and
checks out, so a campaign killed at any point resumes by running it again
over the same directory.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import os
import time
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, circuit_hash
from .pathsum import SimPlan, run_prefix_tree, split_requests
from .statevec import AmplitudeBatch, read_amplitudes, write_amplitudes

# 17 significant digits round-trip float64 exactly, so a merge over
# resumed shards is bit-identical to an uninterrupted one.
SHARD_DIGITS = 17
RETRY_LIMIT = 3


class CampaignError(RuntimeError):
    """A campaign could not finish: repeated job failures or bad shards."""

    def __init__(self, message: str, failed=()):
        super().__init__(message)
        self.failed = tuple(int(p) for p in failed)


class MergeError(CampaignError):
    """A shard file is missing, foreign, duplicated, or inconsistent."""


def request_hash(requests) -> str:
    """Order-sensitive digest of the requested basis indices."""
    data = np.ascontiguousarray(requests, dtype=np.int64)
    return hashlib.sha256(data.tobytes()).hexdigest()[:16]


def plan_hash(circuit: Circuit, plan: SimPlan, requests) -> str:
    """Digest binding a campaign to its circuit, plan parameters and requests."""
    parts = [
        circuit_hash(circuit),
        plan.cut.orientation,
        str(plan.cut.position),
        repr(float(plan.fidelity)),
        str(plan.x_p),
        str(plan.x_b),
        str(plan.seed),
        ",".join(str(r) for r in plan.radices),
        request_hash(requests),
    ]
    return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ShardJob:
    """Self-describing unit of campaign work: one retained prefix."""

    prefix: int
    plan_hash: str
    circuit_hash: str
    request_hash: str

    @property
    def filename(self) -> str:
        return f"{self.plan_hash}.{self.prefix:08x}.amp"


def shard(circuit: Circuit, plan: SimPlan, requests) -> list[ShardJob]:
    """One job per retained prefix, each carrying the hashes it must match."""
    fp = plan_hash(circuit, plan, requests)
    ch = circuit_hash(circuit)
    rh = request_hash(requests)
    return [ShardJob(int(p), fp, ch, rh) for p in plan.retained]


def _shard_header_ok(header: dict, job: ShardJob) -> bool:
    return (
        header.get("plan") == job.plan_hash
        and header.get("circuit") == job.circuit_hash
        and header.get("requests") == job.request_hash
        and header.get("prefix") == str(job.prefix)
    )


def _shard_done(shard_dir: str, job: ShardJob, req: np.ndarray) -> bool:
    path = os.path.join(shard_dir, job.filename)
    try:
        batch, header = read_amplitudes(path)
    except (OSError, ValueError):
        return False
    return _shard_header_ok(header, job) and np.array_equal(batch.indices, req)


def _scan(jobs, requests, shard_dir: str):
    req = np.asarray(requests, dtype=np.int64)
    done, pending = [], []
    for job in jobs:
        (done if _shard_done(shard_dir, job, req) else pending).append(job.prefix)
    return done, pending


@dataclass
class CampaignStatus:
    plan_hash: str
    total: int
    done: tuple[int, ...]
    pending: tuple[int, ...]

    @property
    def complete(self) -> bool:
        return not self.pending


def status(circuit: Circuit, plan: SimPlan, requests, shard_dir: str) -> CampaignStatus:
    """Poll the shard directory; a job is done iff its file checks out."""
    jobs = shard(circuit, plan, requests)
    done, pending = _scan(jobs, requests, shard_dir)
    return CampaignStatus(jobs[0].plan_hash, len(jobs), tuple(done), tuple(pending))


def _worker(circuit, plan, requests, jobs, attempts, shard_dir, fault_spec):
    """Child-process entry point: run assigned jobs, commit via atomic rename.

    fault_spec maps prefix to the number of early attempts that must die
    mid-commit (after the temporary file, before the rename).  It exists so
    tests can kill jobs exactly the way a preempted node would.
    """
    split = split_requests(circuit.n_qubits, plan.cut.block_a, plan.cut.block_b, requests)
    for job in jobs:
        attempt = attempts[job.prefix] + 1
        start = time.perf_counter()
        out = run_prefix_tree(circuit, plan, job.prefix, requests, _split=split)
        seconds = time.perf_counter() - start
        header = {
            "plan": job.plan_hash,
            "circuit": job.circuit_hash,
            "requests": job.request_hash,
            "prefix": str(job.prefix),
            "attempt": str(attempt),
            "seconds": f"{seconds:.6f}",
        }
        final = os.path.join(shard_dir, job.filename)
        tmp = f"{final}.tmp.{os.getpid()}"
        write_amplitudes(tmp, out, digits=SHARD_DIGITS, header=header)
        if attempt <= fault_spec.get(job.prefix, 0):
            os._exit(3)
        os.replace(tmp, final)


@dataclass
class CampaignResult:
    batch: AmplitudeBatch
    plan_hash: str
    wall_seconds: float
    rounds: int
    workers: int
    per_job_seconds: dict[int, float]

    @property
    def job_seconds_total(self) -> float:
        return float(sum(self.per_job_seconds.values()))

    @property
    def job_seconds_max(self) -> float:
        return max(self.per_job_seconds.values(), default=0.0)

    def report(self, forecast_seconds: float | None = None) -> dict:
        out = {
            "plan": self.plan_hash,
            "jobs": len(self.per_job_seconds),
            "workers": self.workers,
            "rounds": self.rounds,
            "wall_seconds": round(self.wall_seconds, 6),
            "job_seconds_total": round(self.job_seconds_total, 6),
            "job_seconds_max": round(self.job_seconds_max, 6),
            "per_job_seconds": {str(p): round(s, 6) for p, s in sorted(self.per_job_seconds.items())},
        }
        rss = _peak_rss_bytes()
        if rss is not None:
            out["peak_rss_bytes"] = rss
        if forecast_seconds is not None:
            out["forecast_seconds"] = float(forecast_seconds)
            out["actual_seconds"] = round(self.job_seconds_total, 6)
        return out


def _peak_rss_bytes() -> int | None:
    try:
        import resource
    except ImportError:
        return None
    self_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    child_kb = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss
    return max(self_kb, child_kb) * 1024


def run_campaign(
    circuit: Circuit,
    plan: SimPlan,
    requests,
    shard_dir: str,
    workers: int = 1,
    retry_limit: int = RETRY_LIMIT,
    fault_spec: dict | None = None,
    report_path: str | None = None,
    forecast_seconds: float | None = None,
) -> CampaignResult:
    """Run every pending shard job, then merge the directory.

    Valid shard files already present are kept as-is, so calling this again
    after an interruption resumes the campaign.  The coordinator is a
    single-threaded poller: it learns about progress only by re-reading the
    shard directory after each round of workers exits.  A job assigned more
    than `retry_limit` extra times without producing a valid shard aborts
    the campaign; the attempt counter ticks per assignment, so jobs that a
    dying sibling kept from running count those rounds too.
    """
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    os.makedirs(shard_dir, exist_ok=True)
    start = time.perf_counter()
    jobs = shard(circuit, plan, requests)
    by_prefix = {job.prefix: job for job in jobs}
    attempts = {job.prefix: 0 for job in jobs}
    ctx = multiprocessing.get_context("fork")
    rounds = 0
    while True:
        done, pending = _scan(jobs, requests, shard_dir)
        if not pending:
            break
        over = sorted(p for p in pending if attempts[p] > retry_limit)
        if over:
            shown = ", ".join(str(p) for p in over[:16])
            raise CampaignError(
                f"{len(over)} shard jobs failed after {retry_limit} retries: prefixes {shown}",
                failed=over,
            )
        rounds += 1
        assigned = [by_prefix[p] for p in pending]
        n_procs = min(workers, len(assigned))
        procs = []
        for w in range(n_procs):
            proc = ctx.Process(
                target=_worker,
                args=(
                    circuit,
                    plan,
                    requests,
                    assigned[w::n_procs],
                    dict(attempts),
                    shard_dir,
                    fault_spec or {},
                ),
            )
            proc.start()
            procs.append(proc)
        for proc in procs:
            proc.join()
        for p in pending:
            attempts[p] += 1

    batch, headers = _merge_verified(circuit, plan, requests, shard_dir)
    per_job = {p: float(h.get("seconds", "nan")) for p, h in headers.items()}
    result = CampaignResult(
        batch=batch,
        plan_hash=jobs[0].plan_hash,
        wall_seconds=time.perf_counter() - start,
        rounds=rounds,
        workers=workers,
        per_job_seconds=per_job,
    )
    if report_path is not None:
        with open(report_path, "w") as f:
            json.dump(result.report(forecast_seconds), f, indent=2)
            f.write("\n")
    return result


def merge(circuit: Circuit, plan: SimPlan, requests, shard_dir: str) -> AmplitudeBatch:
    """Verified fold of all shard files for this plan, ascending prefix order."""
    batch, _ = _merge_verified(circuit, plan, requests, shard_dir)
    return batch


def _merge_verified(circuit, plan, requests, shard_dir):
    jobs = shard(circuit, plan, requests)
    fp = jobs[0].plan_hash
    by_prefix = {job.prefix: job for job in jobs}
    req = np.asarray(requests, dtype=np.int64)

    found: dict[int, str] = {}
    headers: dict[int, dict] = {}
    amps: dict[int, np.ndarray] = {}
    for name in sorted(os.listdir(shard_dir)):
        if not name.endswith(".amp"):
            continue
        path = os.path.join(shard_dir, name)
        try:
            batch, header = read_amplitudes(path)
        except (OSError, ValueError) as exc:
            raise MergeError(f"unreadable shard file {name}: {exc}")
        if header.get("plan") != fp:
            continue  # a different campaign sharing the directory
        try:
            prefix = int(header["prefix"])
        except (KeyError, ValueError):
            raise MergeError(f"shard file {name} lacks a readable prefix header")
        if prefix in found:
            raise MergeError(
                f"duplicate shard for prefix {prefix}: {found[prefix]} and {name}"
            )
        job = by_prefix.get(prefix)
        if job is None:
            raise MergeError(f"shard file {name} claims prefix {prefix}, not in this plan")
        if not _shard_header_ok(header, job):
            raise MergeError(f"shard file {name} does not match the campaign hashes")
        if not np.array_equal(batch.indices, req):
            raise MergeError(f"shard file {name} answers different request indices")
        found[prefix] = name
        headers[prefix] = header
        amps[prefix] = batch.amps

    missing = sorted(p for p in by_prefix if p not in found)
    if missing:
        shown = ", ".join(str(p) for p in missing[:16])
        raise MergeError(f"{len(missing)} shards missing: prefixes {shown}", failed=missing)

    total = AmplitudeBatch.zeros(req)
    for prefix in sorted(found):
        total.amps += amps[prefix]
    return total, headers
