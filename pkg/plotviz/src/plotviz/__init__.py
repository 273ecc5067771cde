"""Offline figure renderer for slicematch experiment CSV logs.

Consumes only the documented CSV schema
(``run_id,seed,dim,alpha,mode,k,gamma,sw2sq,lambda_min,lambda_max,m2``) and a
flat `key = value` figure spec, and produces one multi-panel raster image:
panels split by one column (typically alpha), one series per value of another
column (typically dim or mode), each series averaged over run_id with a
min-max band.
"""

from __future__ import annotations

import argparse
import glob
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

__version__ = "0.1.0"

Y_FIELDS = ("sw2sq", "lambda_min", "lambda_max")

SPEC_KEYS = ("input_glob", "panel_by", "series_by", "y_field", "log_y")


class PlotvizError(ValueError):
    pass


@dataclass
class FigureSpec:
    input_glob: str
    panel_by: str = "alpha"
    series_by: str = "dim"
    y_field: str = "sw2sq"
    log_y: bool = True

    def validate(self):
        if not self.input_glob:
            raise PlotvizError("input_glob must be set")
        if self.y_field not in Y_FIELDS:
            raise PlotvizError(f"y_field must be one of {', '.join(Y_FIELDS)}, got '{self.y_field}'")


def read_spec(path) -> FigureSpec:
    """Parse a flat `key = value` spec file; '#' starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise PlotvizError(f"cannot read spec file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PlotvizError(f"line {lineno}: expected 'key = value', got '{raw.strip()}'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in SPEC_KEYS:
            raise PlotvizError(f"unknown spec key '{key}' (line {lineno})")
        values[key] = val
    if "input_glob" not in values:
        raise PlotvizError("missing required key 'input_glob'")
    if "log_y" in values:
        lowered = values["log_y"].lower()
        if lowered not in ("true", "false"):
            raise PlotvizError(f"log_y must be true or false, got '{values['log_y']}'")
        values["log_y"] = lowered == "true"
    spec = FigureSpec(**values)
    spec.validate()
    return spec


def load_frame(spec: FigureSpec) -> pd.DataFrame:
    """Read every CSV matching the glob and check the columns the spec uses."""
    paths = sorted(glob.glob(spec.input_glob))
    if not paths:
        raise PlotvizError(f"no CSV files match '{spec.input_glob}'")
    frames = []
    needed = {spec.panel_by, spec.series_by, spec.y_field, "k", "run_id"}
    for path in paths:
        frame = pd.read_csv(path)
        for col in sorted(needed):
            if col not in frame.columns:
                raise PlotvizError(f"missing column '{col}' in {path}")
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def render(spec: FigureSpec, out_path) -> "matplotlib.figure.Figure":
    """Render the spec into one image at out_path; returns the figure.

    Pure function of the CSV bytes and the spec: identical inputs produce an
    identical image (given identical library versions).  Nothing is written
    when loading or validation fails.
    """
    spec.validate()
    data = load_frame(spec)
    panels = sorted(data[spec.panel_by].unique())
    series = sorted(data[spec.series_by].unique())
    fig, axes = plt.subplots(
        1, len(panels), figsize=(3.2 * len(panels), 3.0), sharey=True, squeeze=False
    )
    for ax, panel in zip(axes[0], panels):
        chunk = data[data[spec.panel_by] == panel]
        for value in series:
            rows = chunk[chunk[spec.series_by] == value]
            if rows.empty:
                continue
            grouped = rows.groupby("k")[spec.y_field]
            ks = grouped.mean().index.to_numpy()
            ax.plot(ks, grouped.mean().to_numpy(), label=f"{spec.series_by}={value}", linewidth=1.2)
            ax.fill_between(ks, grouped.min().to_numpy(), grouped.max().to_numpy(), alpha=0.25)
        if spec.log_y:
            ax.set_yscale("log")
        ax.set_title(f"{spec.panel_by} = {panel}")
        ax.set_xlabel("iteration k")
    axes[0][0].set_ylabel(spec.y_field)
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotviz", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--spec", required=True, help="flat key = value figure spec")
    parser.add_argument("--out", required=True, help="output image path (png/pdf)")
    args = parser.parse_args(argv)
    try:
        spec = read_spec(args.spec)
        render(spec, args.out)
    except PlotvizError as exc:
        print(f"plotviz error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
