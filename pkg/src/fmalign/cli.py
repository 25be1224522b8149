"""Command-line client: each subcommand builds a service request, runs the
shared handler in-process, and formats the response.

All flags can also be set through FMALIGN_<COMMAND>_<FLAG> environment
variables. Exit codes: 0 success, 1 numerical/runtime failure, 2 usage error.
"""

from __future__ import annotations

import sys

import click
import numpy as np

from .align import embed_new_instance, load_model
from .dataset import load_csv
from .service import schemas
from .service.handlers import (
    StageError,
    handle_align,
    handle_benchmark,
    handle_evaluate,
    handle_sweep,
    handle_synth,
)

CONTEXT = {"auto_envvar_prefix": "FMALIGN", "help_option_names": ["-h", "--help"]}


def _even_dim(ctx, param, value):
    if value < 2 or value % 2 != 0:
        raise click.UsageError(f"--dim must be an even number >= 2, got {value}")
    return value


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def alignment_flags(fn):
    decorators = [
        click.option("--k", default=12, show_default=True, help="Neighbors per sample."),
        click.option("--alpha", default=0.2, show_default=True, help="Edge weight coefficient."),
        click.option("--dim", default=40, show_default=True, callback=_even_dim,
                      help="Final embedding dimension (even; each domain contributes dim/2 modes)."),
        click.option("--skip-tol", default=1e-9, show_default=True,
                      help="Eigenvalues at or below this count as trivial modes."),
        click.option("--mode", type=click.Choice(["instance", "feature"]),
                      default="instance", show_default=True, help="Alignment mode."),
        click.option("--similarity", type=click.Choice(["cosine", "gaussian"]),
                      default="cosine", show_default=True, help="Neighbor similarity."),
        click.option("--standardize/--no-standardize", default=True, show_default=True,
                      help="Zero-mean/unit-variance columns before building graphs."),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


def _params(k, alpha, dim, skip_tol, mode, similarity, standardize) -> schemas.AlignmentParams:
    return schemas.AlignmentParams(
        k=k, alpha=alpha, dim=dim, skip_tol=skip_tol, mode=mode,
        similarity=similarity, standardize=standardize,
    )


@click.group(context_settings=CONTEXT)
def main():
    """Manifold alignment toolkit: align domains, evaluate transfer, serve models."""


@main.command()
@click.option("--source", required=True, type=click.Path(), help="Source feature CSV.")
@click.option("--target", required=True, type=click.Path(), help="Target feature CSV.")
@click.option("--correspondences", required=True, type=click.Path(),
              help="CSV of src_index,tgt_index[,weight] rows.")
@click.option("--out", required=True, type=click.Path(), help="Model output directory.")
@click.option("--label-column", default=None, help="Header column holding labels.")
@alignment_flags
def align(source, target, correspondences, out, label_column,
          k, alpha, dim, skip_tol, mode, similarity, standardize):
    """Align two datasets and write the embedding and model directory."""
    req = schemas.AlignRequest(
        source_path=source,
        target_path=target,
        correspondences_path=correspondences,
        label_column=label_column,
        params=_params(k, alpha, dim, skip_tol, mode, similarity, standardize),
        out_dir=out,
    )
    try:
        response, _ = handle_align(req)
    except StageError as exc:
        _fail(exc)
    click.echo(f"aligned {response.rows} rows into {response.dim} dimensions")
    click.echo("retained eigenvalues: " + " ".join(f"{v:.6g}" for v in response.eigenvalues))
    click.echo(f"projection defect of correspondences vs filtered basis: "
               f"{response.projection_defect:.6g}")
    click.echo(f"embedding: {response.embedding_path}")
    click.echo(f"model: {response.out_dir}")


@main.command()
@click.option("--source", required=True, type=click.Path(), help="Source feature CSV.")
@click.option("--target", required=True, type=click.Path(), help="Target feature CSV.")
@click.option("--label-column", default=None, help="Header column holding labels.")
@click.option("--labels-source", default=None, type=click.Path(),
              help="Sidecar label file for the source (one integer per line).")
@click.option("--labels-target", default=None, type=click.Path(),
              help="Sidecar label file for the target.")
@click.option("--splits", default=20, show_default=True, help="Randomized splits to average.")
@click.option("--labeled-source", default=20, show_default=True,
              help="Labeled samples per class, source.")
@click.option("--labeled-target", default=3, show_default=True,
              help="Labeled samples per class, target.")
@click.option("--seed", default=0, show_default=True, help="Split RNG seed.")
@click.option("--out", default=None, type=click.Path(), help="Per-split results CSV.")
@alignment_flags
def evaluate(source, target, label_column, labels_source, labels_target, splits,
             labeled_source, labeled_target, seed, out,
             k, alpha, dim, skip_tol, mode, similarity, standardize):
    """Run the split protocol and report mean/std target accuracy."""
    req = schemas.EvaluateRequest(
        source_path=source,
        target_path=target,
        label_column=label_column,
        source_labels_path=labels_source,
        target_labels_path=labels_target,
        labeled_source=labeled_source,
        labeled_target=labeled_target,
        seed=seed,
        splits=splits,
        params=_params(k, alpha, dim, skip_tol, mode, similarity, standardize),
        out_path=out,
    )
    try:
        response = handle_evaluate(req)
    except StageError as exc:
        _fail(exc)
    click.echo(f"{response.task}: accuracy {response.accuracy_mean:.4f} "
               f"+/- {response.accuracy_std:.4f} over {len(response.per_split)} splits")
    if response.out_path:
        click.echo(f"results: {response.out_path}")


@main.command()
@click.option("--manifold", type=click.Choice(["swiss-roll", "s-curve", "both"]),
              default="both", show_default=True, help="Which synthetic surface(s).")
@click.option("--count", default=400, show_default=True, help="Samples per manifold.")
@click.option("--noise", default=None, type=float,
              help="Noise std; default is 0.05 of the noiseless point spread.")
@click.option("--seed", default=0, show_default=True, help="Generator seed.")
@click.option("--pairs", "n_pairs", default=40, show_default=True,
              help="Rank-matched correspondences to emit (with --manifold both).")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
def synth(manifold, count, noise, seed, n_pairs, out):
    """Generate noisy swiss-roll / S-curve samples plus correspondences."""
    req = schemas.SynthRequest(
        manifold=manifold, count=count, noise=noise, seed=seed,
        n_pairs=n_pairs, out_dir=out,
    )
    try:
        response = handle_synth(req)
    except StageError as exc:
        _fail(exc)
    for name, sigma in response.noise_used.items():
        click.echo(f"{name}: {count} points, noise std {sigma:.6g}")
    for path in response.files:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--suite", default=None, type=click.Path(),
              help="Suite file of named tasks; omit for a synthetic task.")
@click.option("--methods", default="fma_instance,fma_feature,sma", show_default=True,
              help="Comma-separated methods to time.")
@click.option("--synthetic-size", default=600, show_default=True,
              help="Samples per synthetic domain (no --suite).")
@click.option("--synthetic-features", default=20, show_default=True,
              help="Features per synthetic domain (no --suite).")
@click.option("--seed", default=0, show_default=True, help="Synthetic data seed.")
@click.option("--sweep-parameter", default=None,
              help="Sweep this parameter instead of timing (dim, k, alpha, ...).")
@click.option("--sweep-values", default=None,
              help="Comma-separated values for --sweep-parameter.")
@click.option("--source", default=None, type=click.Path(), help="Source CSV (sweep mode).")
@click.option("--target", default=None, type=click.Path(), help="Target CSV (sweep mode).")
@click.option("--label-column", default=None, help="Label column (sweep mode).")
@click.option("--labeled-source", default=20, show_default=True,
              help="Labeled samples per class, source (sweep mode).")
@click.option("--labeled-target", default=3, show_default=True,
              help="Labeled samples per class, target (sweep mode).")
@click.option("--splits", default=5, show_default=True, help="Splits per sweep point.")
@click.option("--out", default=None, type=click.Path(), help="Output CSV.")
@alignment_flags
def benchmark(suite, methods, synthetic_size, synthetic_features, seed,
              sweep_parameter, sweep_values, source, target, label_column,
              labeled_source, labeled_target, splits, out,
              k, alpha, dim, skip_tol, mode, similarity, standardize):
    """Time alignment methods, or sweep one parameter against accuracy."""
    params = _params(k, alpha, dim, skip_tol, mode, similarity, standardize)
    if sweep_parameter is not None:
        if sweep_values is None or source is None or target is None:
            raise click.UsageError(
                "--sweep-parameter needs --sweep-values, --source and --target"
            )
        req = schemas.SweepRequest(
            source_path=source, target_path=target, label_column=label_column,
            parameter=sweep_parameter,
            values=[float(v) for v in sweep_values.split(",")],
            labeled_source=labeled_source, labeled_target=labeled_target,
            seed=seed, splits=splits, params=params, out_path=out,
        )
        try:
            response = handle_sweep(req)
        except StageError as exc:
            _fail(exc)
        for value, acc in response.rows:
            click.echo(f"{sweep_parameter}={value:g}: accuracy {acc:.4f}")
        if response.out_path:
            click.echo(f"results: {response.out_path}")
        return

    req = schemas.BenchmarkRequest(
        suite_path=suite,
        methods=[m.strip() for m in methods.split(",") if m.strip()],
        synthetic_size=synthetic_size,
        synthetic_features=synthetic_features,
        seed=seed,
        params=params,
        out_path=out,
    )
    try:
        response = handle_benchmark(req)
    except StageError as exc:
        _fail(exc)
    for row in response.rows:
        click.echo(f"{row['task']} {row['method']}: {row['seconds']:.3f} s")
    if response.out_path:
        click.echo(f"results: {response.out_path}")


@main.command()
@click.option("--model", "model_dir", required=True, type=click.Path(),
              help="Model directory written by `fmalign align`.")
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="CSV of samples to embed (no labels).")
@click.option("--domain", type=click.Choice(["source", "target"]),
              default="target", show_default=True, help="Which domain the samples belong to.")
@click.option("--out", default=None, type=click.Path(), help="Output CSV of coordinates.")
def embed(model_dir, input_path, domain, out):
    """Embed samples that were not part of the original alignment."""
    try:
        model = load_model(model_dir)
        X = load_csv(input_path, domain_id=domain)
        coords = np.array(
            [embed_new_instance(model, row, domain) for row in X.values]
        )
    except Exception as exc:
        _fail(exc)
    if out:
        header = ",".join(f"z_{i}" for i in range(coords.shape[1]))
        np.savetxt(out, coords, delimiter=",", fmt="%.17g", header=header, comments="")
        click.echo(f"wrote {out}")
    else:
        for row in coords:
            click.echo(",".join(f"{v:.6g}" for v in row))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Start the HTTP service wrapping this package."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
