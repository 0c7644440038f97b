"""CSV report writing with a traceability header comment."""

from __future__ import annotations

from pathlib import Path

from . import __version__


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(
    path: str | Path,
    fieldnames: list[str],
    rows: list[dict],
    cfg_hash: str,
    seed: int,
) -> Path:
    """Write rows with a ``#`` header embedding tool version, config hash, seed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# scenekit={__version__} config_hash={cfg_hash} seed={seed}"]
    lines.append(",".join(fieldnames))
    for row in rows:
        lines.append(",".join(_format(row.get(name)) for name in fieldnames))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_dictionary(dictionary, encoding, out_dir: str | Path, cfg_hash: str, seed: int) -> None:
    """Human-readable scenario membership plus raw W and H as CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for j in range(dictionary.k):
        members = " ".join(dictionary.members(j))
        lines.append(f"scenario_{j:03d}\t{dictionary.provenance[j]}\t{members}")
    (out / "scenarios.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    w_rows = [
        dict(
            {"object": dictionary.object_names[i]},
            **{f"scenario_{j:03d}": float(dictionary.w[i, j]) for j in range(dictionary.k)},
        )
        for i in range(dictionary.w.shape[0])
    ]
    write_csv(
        out / "w.csv",
        ["object"] + [f"scenario_{j:03d}" for j in range(dictionary.k)],
        w_rows,
        cfg_hash,
        seed,
    )
    if encoding is not None:
        h = encoding.h
        h_rows = [
            dict(
                {"scenario": f"scenario_{j:03d}"},
                **{f"view_{i:05d}": float(h[j, i]) for i in range(h.shape[1])},
            )
            for j in range(h.shape[0])
        ]
        write_csv(
            out / "h.csv",
            ["scenario"] + [f"view_{i:05d}" for i in range(h.shape[1])],
            h_rows,
            cfg_hash,
            seed,
        )


def load_dictionary_csv(path: str | Path):
    """Read a w.csv produced by :func:`write_dictionary` back into a dictionary."""
    import numpy as np

    from .pbmf import ScenarioDictionary

    lines = Path(path).read_text(encoding="utf-8").splitlines()
    lines = [ln for ln in lines if not ln.startswith("#")]
    header = lines[0].split(",")
    if header[0] != "object":
        raise ValueError(f"{path}: not a dictionary CSV")
    k = len(header) - 1
    names = []
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        names.append(parts[0])
        rows.append([float(x) for x in parts[1:]])
    return ScenarioDictionary(
        w=np.asarray(rows, dtype=float),
        object_names=names,
        provenance=["loaded"] * k,
    )
