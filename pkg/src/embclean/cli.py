"""Command-line entry point: rank, autoclean, simulate, eval, serve."""

from __future__ import annotations

import json
import math
import os
import sys

import click
import numpy as np

from . import autocut, bench, indicators, io, offtopic
from .errors import InputError

ISSUE_CHOICES = click.Choice(io.ISSUE_TYPES)
SHORT_ISSUES = {"ot": "offtopic", "nd": "duplicates", "le": "labelerrors"}


def _progress(msg: str) -> None:
    click.echo(msg, err=True)


def _threads(value: int | None) -> int | None:
    env = os.environ.get("EMBCLEAN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise InputError(f"EMBCLEAN_THREADS={env!r} is not an integer") from exc
    return value


def _load_matrix(embeddings_path, normalize: bool) -> io.EmbeddingMatrix:
    m = io.load_embeddings(embeddings_path)
    _progress(f"loaded {m.n_samples} x {m.dim} embeddings from {embeddings_path}")
    if normalize:
        m = io.normalize_rows(m)
    return m


def _load_labels_for(m, labels_path) -> io.LabelVector:
    if labels_path is None:
        raise InputError("labels required for label-error analysis (--labels)")
    return io.load_labels(labels_path, n_expected=m.n_samples)


def _compute_ranking(m, issue, labels_path, top_k, threads) -> io.Ranking:
    if issue == "offtopic":
        return offtopic.offtopic_ranking(m)
    if issue == "duplicates":
        return indicators.near_duplicate_ranking(m, top_k=top_k, threads=threads)
    labels = _load_labels_for(m, labels_path)
    return indicators.label_error_ranking(m, labels, threads=threads).ranking


@click.group()
def cli():
    """Rank and flag off-topic samples, near duplicates, and label errors."""


@cli.command()
@click.option("--embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--issue", required=True, type=ISSUE_CHOICES)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False))
@click.option("--top-k", type=int, help="Keep only the k closest pairs (duplicates).")
@click.option("--normalize/--no-normalize", default=True, show_default=True)
@click.option("--threads", type=int, default=None, help="Worker threads for block scans.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def rank(embeddings, issue, labels, top_k, normalize, threads, out):
    """Write a ranking CSV for one issue type."""
    m = _load_matrix(embeddings, normalize)
    r = _compute_ranking(m, issue, labels, top_k, _threads(threads))
    io.save_ranking(r, out)
    _progress(f"wrote {len(r)} {issue} candidates to {out}")


@cli.command()
@click.option("--embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--issue", required=True, type=ISSUE_CHOICES)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False))
@click.option("--alpha", type=float, default=0.10, show_default=True)
@click.option("--q", type=float, default=0.05, show_default=True)
@click.option("--normalize/--no-normalize", default=True, show_default=True)
@click.option("--threads", type=int, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def autoclean(embeddings, issue, labels, alpha, q, normalize, threads, out):
    """Flag issues automatically with the logistic tail cutoff."""
    m = _load_matrix(embeddings, normalize)
    pairwise = issue == "duplicates"
    n = m.n_samples
    top_k = None
    if pairwise:
        total = n * (n - 1) // 2
        if total > indicators.PAIR_BUDGET:
            # quantile fit and cutoff only need the left tail of the
            # distribution, so a top-k head is sufficient beyond the budget
            _, alpha2 = autocut.quantile_fractions(alpha, pairwise=True)
            top_k = min(total, math.ceil(alpha2 * total) + 1)
    r = _compute_ranking(m, issue, labels, top_k, _threads(threads))
    transformed = autocut.logit_transform(r.scores)
    fit = autocut.fit_left_tail(
        transformed, alpha, pairwise, n=n, total=r.total_candidates
    )
    keys = [tuple(k) for k in r.keys.tolist()] if pairwise else r.keys.tolist()
    decision = autocut.decide_cutoff(fit, q, n, transformed, keys, issue_type=issue)
    if r.truncated and len(transformed) and transformed[-1] < decision.s_cut:
        raise InputError(
            "cutoff exceeds the retrieved score head; rerun with a larger budget"
        )
    with io._atomic_write(out, "w") as f:
        f.write(decision.to_json())
        f.write("\n")
    _progress(
        f"flagged {len(decision.flagged)} of {r.total_candidates} {issue} candidates"
    )


def _make_clusters(n, dim, classes, separation, rng):
    if classes < 1:
        raise InputError("need at least one class")
    if n < 2 * classes:
        raise InputError(f"need n >= {2 * classes} for {classes} classes")
    if dim < classes:
        raise InputError(f"need dim >= classes, got dim={dim} classes={classes}")
    basis, _ = np.linalg.qr(rng.standard_normal((dim, classes)))
    centers = basis.T * (separation / math.sqrt(2.0))
    labels = np.arange(n) % classes
    values = centers[labels] + rng.standard_normal((n, dim))
    return (
        io.EmbeddingMatrix(values=values),
        io.LabelVector(labels=labels, n_classes=classes),
    )


@cli.command()
@click.option("--n", required=True, type=int, help="Clean samples before planting.")
@click.option("--dim", required=True, type=int)
@click.option("--classes", required=True, type=int)
@click.option("--contamination", required=True, type=float)
@click.option("--steps", type=int, default=None, help="Defaults to the issue count.")
@click.option("--issues", required=True, help="Comma list from ot,nd,le.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--separation", type=float, default=10.0, show_default=True)
@click.option("--ot-shift", type=float, default=10.0, show_default=True)
@click.option("--dup-noise", type=float, default=0.0, show_default=True)
@click.option(
    "--label-mode",
    type=click.Choice(["uniform", "prevalence"]),
    default="uniform",
    show_default=True,
)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def simulate(
    n,
    dim,
    classes,
    contamination,
    steps,
    issues,
    seed,
    separation,
    ot_shift,
    dup_noise,
    label_mode,
    out_dir,
):
    """Build a synthetic contaminated dataset with ground truth files.

    Issues are injected in the fixed order ot, nd, le, each with the
    per-step prevalence that compounds to the requested contamination.
    """
    wanted = []
    for tok in issues.split(","):
        tok = tok.strip().lower()
        if tok not in SHORT_ISSUES:
            raise InputError(f"unknown issue {tok!r}; choose from ot,nd,le")
        if tok not in wanted:
            wanted.append(tok)
    wanted.sort(key=list(SHORT_ISSUES).index)
    if steps is None:
        steps = len(wanted)
    c_step = bench.mixed_schedule(contamination, steps)
    _progress(f"per-step prevalence {c_step:.6f} over {steps} step(s)")

    rng = np.random.default_rng(seed)
    m, labels = _make_clusters(n, dim, classes, separation, rng)
    positives: dict[str, set] = {}
    if "ot" in wanted:
        m, t = bench.plant_offtopic(m, c_step, shift=ot_shift, seed=seed + 1)
        added = m.n_samples - len(labels)
        extra = (np.arange(added) + len(labels)) % classes
        labels = io.LabelVector(
            labels=np.concatenate([labels.labels, extra]), n_classes=classes
        )
        positives["offtopic"] = set(t.positives)
    if "nd" in wanted:
        before = m.n_samples
        m, t = bench.plant_duplicates(m, c_step, noise=dup_noise, seed=seed + 2)
        copies = m.n_samples - before
        src = [min(p) for p in sorted(t.positives, key=max)]
        labels = io.LabelVector(
            labels=np.concatenate([labels.labels, labels.labels[src]]),
            n_classes=classes,
        )
        assert len(labels) == m.n_samples and copies == len(src)
        positives["duplicates"] = set(t.positives)
    if "le" in wanted:
        flip = (
            bench.contaminate_labels_uniform
            if label_mode == "uniform"
            else bench.contaminate_labels_prevalence
        )
        labels, t = flip(labels, c_step, seed=seed + 3)
        positives["labelerrors"] = set(t.positives)

    os.makedirs(out_dir, exist_ok=True)
    n_final = m.n_samples
    io.save_embeddings(m, os.path.join(out_dir, "embeddings.npy"))
    io.save_labels(labels, os.path.join(out_dir, "labels.txt"))
    for issue, pos in positives.items():
        total = n_final * (n_final - 1) // 2 if issue == "duplicates" else n_final
        truth = bench.GroundTruth(issue, frozenset(pos), total)
        bench.save_ground_truth(
            truth, os.path.join(out_dir, f"truth_{issue}.csv")
        )
    io.save_config(
        io.CleaningConfig(seed=seed), os.path.join(out_dir, "config.txt")
    )
    _progress(f"wrote {n_final} samples ({dim} dims, {classes} classes) to {out_dir}")


@cli.command(name="eval")
@click.option("--ranking", "ranking_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--metrics", default="auroc,ap,afe", show_default=True)
@click.option(
    "--total-candidates",
    type=int,
    default=None,
    help="Candidate universe size for truncated rankings.",
)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def eval_cmd(ranking_path, truth_path, metrics, total_candidates, out):
    """Score a ranking against a ground truth file."""
    with open(ranking_path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
    issue = "duplicates" if header == "rank,score,index_a,index_b" else "offtopic"
    r = io.load_ranking(ranking_path, issue, total_candidates=total_candidates)
    t = bench.load_ground_truth(truth_path, issue, r.total_candidates)
    wanted = [tok.strip() for tok in metrics.split(",") if tok.strip()]
    report = bench.evaluate(r, t, wanted)
    with io._atomic_write(out, "w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    _progress(", ".join(f"{k}={v}" for k, v in report.items()))


@cli.command()
@click.option("--embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--labels", type=click.Path(exists=True, dir_okay=False))
@click.option("--media-root", type=click.Path(file_okay=False, exists=True))
@click.option("--state", "state_dir", type=click.Path(file_okay=False), default="embclean-state", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--top-k", type=int, default=None, help="Duplicate pairs to keep.")
@click.option("--normalize/--no-normalize", default=True, show_default=True)
@click.option("--threads", type=int, default=None)
@click.option("--ui-dir", type=click.Path(file_okay=False, exists=True), default=None)
def serve(
    embeddings, labels, media_root, state_dir, port, host, top_k, normalize, threads, ui_dir
):
    """Start the human-in-the-loop review service."""
    import uvicorn

    from .service.app import create_app
    from .service.state import ReviewState

    m = _load_matrix(embeddings, normalize)
    rankings = {"offtopic": _compute_ranking(m, "offtopic", None, None, None)}
    rankings["duplicates"] = _compute_ranking(
        m, "duplicates", None, top_k, _threads(threads)
    )
    if labels:
        rankings["labelerrors"] = _compute_ranking(
            m, "labelerrors", labels, None, _threads(threads)
        )
    state = ReviewState(rankings=rankings, state_dir=state_dir, media_root=media_root)
    app = create_app(state, ui_dir=ui_dir)
    _progress(f"serving {len(rankings)} rankings on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return 130
    except (click.ClickException, InputError, OSError) as exc:
        if isinstance(exc, click.ClickException):
            exc.show(file=sys.stderr)
        else:
            click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:  # internal error
        import traceback

        traceback.print_exc()
        click.echo(f"internal error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
