"""Training-pair construction via the primary CLI's external interfaces.

The sidecar never imports the extraction library; it reads review files in
the shared quad-lines format for the input side and shells out to
``bvsp templates`` / ``bvsp render`` to obtain template ids and rendered
target sequences.
"""

from __future__ import annotations

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path


def _bvsp_command() -> list[str]:
    exe = shutil.which("bvsp")
    if exe:
        return [exe]
    return [sys.executable, "-m", "bvsp.cli"]


def _run_bvsp(args: list[str]) -> str:
    command = _bvsp_command() + args
    result = subprocess.run(command, capture_output=True, text=True)
    if result.returncode != 0:
        raise RuntimeError(
            f"{' '.join(command)} failed ({result.returncode}): {result.stderr.strip()}"
        )
    return result.stdout


def list_template_ids() -> list[str]:
    """All template ids known to the primary, via ``bvsp templates``."""
    out = _run_bvsp(["templates", "--format", "tsv"])
    lines = out.strip().splitlines()
    return [line.split("\t", 1)[0] for line in lines[1:]]


def read_input_sentences(data_path: Path) -> list[str]:
    """Sentence texts from a quad-lines file (the part left of '####')."""
    sentences = []
    for line in Path(data_path).read_text("utf8").splitlines():
        if not line.strip():
            continue
        sep = line.find("####")
        if sep < 0:
            raise ValueError(f"not a quad-lines row: {line[:60]!r}")
        sentences.append(line[:sep])
    return sentences


def render_targets(data_path: Path, template_id: str) -> list[str]:
    """Target sequences for every sentence, rendered by ``bvsp render``."""
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "targets.txt"
        _run_bvsp(
            [
                "render",
                "--data", str(data_path),
                "--template", template_id,
                "--out", str(out),
            ]
        )
        return out.read_text("utf8").splitlines()


def build_pairs(data_path: Path, template_ids: list[str]) -> dict[str, list[tuple[str, str]]]:
    """Per-template (input sentence, target sequence) training pairs."""
    inputs = read_input_sentences(data_path)
    pairs: dict[str, list[tuple[str, str]]] = {}
    for template_id in template_ids:
        targets = render_targets(data_path, template_id)
        if len(targets) != len(inputs):
            raise RuntimeError(
                f"render produced {len(targets)} targets for {len(inputs)} inputs"
            )
        pairs[template_id] = [
            (source, target) for source, target in zip(inputs, targets) if target.strip()
        ]
    return pairs
