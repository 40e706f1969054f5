# Copyright 2026 The defex Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Smoke tests for the Python extension module."""

import json
import math
import os
import subprocess

import pytest

import defex

SMALL_SPEC = {
    "n_types": 4,
    "n_distractors": 6,
    "instances_per_definition": 4,
    "distractor_instances_per_definition": 4,
    "mentions_per_type": 4,
}
SMALL_ENCODER = {"embedding_dim": 16, "n_heads": 2}


def test_ranking_loss_worked_example():
    anchor = [1.0, 0.0]
    positive = [0.5, math.sqrt(0.75)]
    negative = [0.6, 0.8]
    assert defex.ranking_loss(anchor, positive, [negative], 0.2) == pytest.approx(0.3, abs=1e-12)


def test_small_pipeline_in_memory():
    data = defex.generate_synthetic_corpus(SMALL_SPEC, 3)
    assert len(data.ontology) == 4
    extra = [t.definition for t in data.ontology.types]
    model = defex.initialize_model(SMALL_ENCODER, data.corpus, extra, 1)
    model, report = defex.pretrain(model, data.corpus, {"epochs": 2, "seed": 1})
    assert len(report.epoch_loss) == 2
    model, _, retrieved = defex.warm(model, data.ontology, data.corpus, {"epochs": 1})
    assert retrieved
    index = defex.build_definition_index(model, data.ontology)
    assert index.model_fingerprint == model.fingerprint()
    preds, counters = defex.extract(model, index, data.documents, 0.0)
    assert counters["definition_encoder_calls"] == 0
    assert counters["context_encoder_calls"] > 0
    report = defex.micro_prf(preds, data.gold, "classification", data.ontology)
    assert 0.0 <= report["f1"] <= 1.0
    assert report["tp"] + report["fp"] == len(preds)


def test_errors_carry_their_category(tmp_path):
    with pytest.raises(defex.DefexError, match="input-not-found"):
        defex.load_alignment_corpus(str(tmp_path / "missing.jsonl"))


def test_run_command_writes_a_manifest(tmp_path):
    config = {"paths": {"output_dir": str(tmp_path)}, "seed": 3, "synthetic": SMALL_SPEC}
    run_dir = defex.run_command("synth", config, run_name="data")
    manifest = json.loads(open(os.path.join(run_dir, "run_manifest.json")).read())
    assert manifest["command"] == "synth"
    assert os.path.exists(os.path.join(run_dir, "alignments.jsonl"))


def test_cli_reports_missing_input(tmp_path):
    cli = os.environ.get("DEFEX_CLI")
    if not cli:
        pytest.skip("DEFEX_CLI not set")
    proc = subprocess.run(
        [cli, "pretrain", "--corpus", str(tmp_path / "nope.jsonl"), "-o", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2
    assert "input-not-found" in proc.stderr
