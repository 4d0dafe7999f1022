"""Regenerate the bundled synthetic survey and model skeleton.

Usage: python tools/generate_synthetic_survey.py
Writes src/stergm/data/synthetic_survey.csv and synthetic_model.json.
Deterministic; rerunning must reproduce the committed files byte for byte.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from stergm.synthdata import (make_synthetic_survey, synthetic_model,
                              synthetic_target_spec)


def main():
    data_dir = Path(__file__).resolve().parents[1] / "src" / "stergm" / "data"
    data_dir.mkdir(parents=True, exist_ok=True)

    survey = make_synthetic_survey()
    survey.to_csv(data_dir / "synthetic_survey.csv")

    doc = synthetic_model().to_json()
    doc.update(synthetic_target_spec().to_json())
    with open(data_dir / "synthetic_model.json", "w") as fh:
        json.dump(doc, fh, indent=1)
    n_noms = sum(len(v) for v in survey.noms.values())
    print(f"synthetic survey: {len(survey)} egos, {n_noms} nominations")


if __name__ == "__main__":
    main()
