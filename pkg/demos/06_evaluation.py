"""
Scoring the pipeline on a simulated corpus
==========================================

The evaluation harness runs the pipeline over many simulated grasps with
known rotation and reports angle error, onset delay and the stable versus
rotational-failure confusion counts. Here a small corpus is written to disk
and scored the same way the command-line tool does it.
"""

import tempfile
from pathlib import Path

from tactile_rotation.evaluate import default_corpus, evaluate_corpus, write_corpus

with tempfile.TemporaryDirectory() as tmp:
    items = default_corpus(seed=11, n_rotational=12, n_stable=6)
    write_corpus(items, Path(tmp) / "seqs")
    report = evaluate_corpus(Path(tmp) / "seqs", out_dir=Path(tmp) / "report")

    print("name          truth                 predicted             onset  MAE")
    for row in report.rows[:8]:
        delay = "" if row.detected_onset is None else f"{row.onset_delay_frames:+.0f}"
        print(f"{row.name:12s}  {row.true_class.value:20s}  {row.predicted_class.value:20s}  "
              f"{delay:>5s}  {row.mean_abs_angle_error_deg:.2f}")
    print()
    for key, value in report.summary.items():
        print(f"{key}: {value}")
    print("\nfiles:", sorted(p.name for p in (Path(tmp) / "report").iterdir()))
