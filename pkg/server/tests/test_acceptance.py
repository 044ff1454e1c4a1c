"""Acceptance: the bridged pipeline must be indistinguishable from in-process.

Runs the full attack simulation twice: once with the client package's
in-process oracle, once through the bridge client talking to this server,
same seed and dims. Every score and every reported rate must agree within
1e-6. Requires the sibling `zinvert` package (test-only dependency).
"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

zinvert = pytest.importorskip("zinvert")

from zinvert import (  # noqa: E402
    GaConfig,
    connect,
    generate_world,
    make_orthonormal_oracle,
    run_attack_simulation,
)

SERVER_DIR = Path(__file__).resolve().parents[1]


def criterion(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def server_command(config_path):
    return [sys.executable, "-m", "model_server", "--config", str(config_path)]


def test_bridge_differential(tmp_path):
    dims = {"latent_dim": 8, "image_shape": [16], "feature_dim": 8, "seed": 4242}
    config_path = tmp_path / "server.json"
    config_path.write_text(json.dumps(dims))

    world = generate_world(5, 2, 8, sigma=0.1, seed=3)
    ga = GaConfig(
        population_size=32,
        selection_rate=0.3,
        mutation_ratio=0.1,
        max_generations=40,
        patience=10,
        restarts=2,
        rng_seed=13,
    )
    far_targets = [0.0, 0.01, 0.1]

    gen, ext = make_orthonormal_oracle(8, 8, seed=4242, image_dim=16)
    local = run_attack_simulation(world, gen, ext, ext, ga, far_targets)

    remote_gen, remote_ext, client = connect(server_command(config_path), timeout=60.0)
    try:
        bridged = run_attack_simulation(
            world, remote_gen, remote_ext, remote_ext, ga, far_targets
        )
    finally:
        client.close()

    score_gap = max(
        float(np.abs(local.scores.category(name) - bridged.scores.category(name)).max())
        for name in (
            "genuine",
            "imposter",
            "mated_attack_type1",
            "mated_attack_type2",
        )
    )
    rate_gap = 0.0
    for p_local, p_bridged in zip(
        local.report.operating_points, bridged.report.operating_points
    ):
        rate_gap = max(
            rate_gap,
            abs(p_local.threshold - p_bridged.threshold),
            abs(p_local.tar - p_bridged.tar),
            abs(p_local.sar_type1 - p_bridged.sar_type1),
            abs(p_local.sar_type2 - p_bridged.sar_type2),
        )
    criterion(
        "bridge-differential",
        score_gap <= 1e-6 and rate_gap <= 1e-6,
        f"max |score| gap {score_gap:.2e}, max |rate| gap {rate_gap:.2e} "
        f"across {len(far_targets)} operating points and "
        f"{local.scores.imposter.size + local.scores.genuine.size} bona fide scores",
    )


def test_malformed_request_robustness(tmp_path):
    import subprocess

    config_path = tmp_path / "server.json"
    config_path.write_text(
        json.dumps({"latent_dim": 8, "image_shape": [16], "feature_dim": 8, "seed": 0})
    )
    proc = subprocess.Popen(
        server_command(config_path),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
    )
    try:
        outcomes = []
        for line in (
            "garbage that is not json",
            '{"op": "explode"}',
            '{"op": "generate", "latents": [[1, 2]]}',
            '{"op": "info"}',
        ):
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            outcomes.append(json.loads(proc.stdout.readline()))
        survived = (
            outcomes[0]["ok"] is False
            and outcomes[1]["ok"] is False
            and outcomes[2]["ok"] is False
            and outcomes[3]["ok"] is True
            and outcomes[3]["latent_dim"] == 8
        )
        criterion(
            "bridge-robustness",
            survived,
            "garbage line, unknown op and bad batch each got ok=false; "
            "the server kept serving",
        )
    finally:
        proc.stdin.close()
        proc.wait(timeout=5)
