import json

import numpy as np
import pytest

from latentgeom import network as netmod
from latentgeom.cli import InitScheme, generate_network, main, sample_latent
from latentgeom.global_basis import ganspace_basis, save_direction_set


@pytest.fixture(scope="module")
def net_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("nets") / "net.json"
    rc = main(
        ["gen-net", "--dims", "8,8,8,8", "--slope", "0.2", "--seed", "0",
         "--out", str(path)]
    )
    assert rc == 0
    return path


def run(args):
    return main([str(a) for a in args])


def test_gen_net_writes_loadable_file(net_file):
    net = netmod.load_network(net_file)
    assert net.in_dim == 8 and net.out_dim == 8
    assert len(net.layers) == 3


def test_gen_net_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    for out in (a, b):
        assert run(["gen-net", "--dims", "4,4", "--seed", "9", "--out", out]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_net_orthogonal_init():
    net = generate_network([6, 6], 0.2, 0, init=InitScheme.ORTHOGONAL)
    W = net.layers[0].weight
    assert np.allclose(W.T @ W, np.eye(6), atol=1e-10)


def test_gen_net_gain_scales_weights():
    base = generate_network([4, 4], 0.2, 0)
    scaled = generate_network([4, 4], 0.2, 0, gain=2.0)
    assert np.allclose(scaled.layers[0].weight, 2.0 * base.layers[0].weight)


def test_gen_net_rejects_bad_args(tmp_path):
    out = tmp_path / "x.json"
    assert run(["gen-net", "--dims", "4", "--out", out]) == 2
    assert run(["gen-net", "--dims", "4,4", "--slope", "0", "--out", out]) == 2
    assert run(["gen-net", "--dims", "4,4", "--gain", "-1", "--out", out]) == 2


def test_sample_latent_off_boundary(net_file):
    net = netmod.load_network(net_file)
    z = sample_latent(net, 0)
    assert not netmod.is_on_boundary(net, z)
    assert np.array_equal(z, sample_latent(net, 0))


def test_basis_output(net_file, tmp_path):
    out = tmp_path / "basis.json"
    assert run(["basis", "--net", net_file, "--seed", "1", "--full",
                "--out", out]) == 0
    data = json.loads(out.read_text())
    S = np.asarray(data["S"])
    assert S.shape == (8,)
    assert np.all(np.diff(S) <= 0)
    U = np.asarray(data["U"])
    V = np.asarray(data["V"])
    net = netmod.load_network(net_file)
    J = netmod.jacobian(net, np.asarray(data["z"]))
    assert np.max(np.abs(J @ U - V * S[None, :])) <= 1e-9


def test_basis_with_z_file(net_file, tmp_path):
    zpath = tmp_path / "z.json"
    zpath.write_text(json.dumps([0.1] * 8))
    out = tmp_path / "basis.json"
    assert run(["basis", "--net", net_file, "--z-file", zpath, "--out", out]) == 0
    data = json.loads(out.read_text())
    assert np.allclose(data["z"], 0.1)


def test_traverse_iterative_outputs(net_file, tmp_path):
    oj = tmp_path / "path.json"
    oc = tmp_path / "path.csv"
    assert run(["traverse", "--net", net_file, "--mode", "iterative",
                "--intensity", "2.0", "--steps", "20", "--out-json", oj,
                "--out-csv", oc]) == 0
    data = json.loads(oj.read_text())
    assert data["mode"] == "iterative"
    assert len(data["iterates"]) == 21
    lines = oc.read_text().splitlines()
    assert lines[0].split(",")[0] == "step"
    assert len(lines) == 21
    # chord lengths approximate intensity / steps
    chords = [float(l.split(",")[1]) for l in lines[1:]]
    assert all(abs(c - 0.1) / 0.1 < 0.25 for c in chords)


def test_traverse_linear_outputs(net_file, tmp_path):
    oj = tmp_path / "lin.json"
    assert run(["traverse", "--net", net_file, "--mode", "linear",
                "--intensity", "1.0", "--steps", "4", "--out-json", oj]) == 0
    data = json.loads(oj.read_text())
    assert data["mode"] == "linear"
    assert len(data["ts"]) == 5
    assert data["ts"][-1] == 1.0


def test_traverse_guided_requires_guide(net_file, tmp_path):
    oj = tmp_path / "g.json"
    assert run(["traverse", "--net", net_file, "--mode", "guided",
                "--out-json", oj]) == 2


def test_traverse_guided_modes(net_file, tmp_path):
    net = netmod.load_network(net_file)
    gpath = tmp_path / "dirs.json"
    save_direction_set(ganspace_basis(net, 500, 0), gpath)
    for mode in ("guided", "stochastic-guided"):
        oj = tmp_path / f"{mode}.json"
        assert run(["traverse", "--net", net_file, "--mode", mode,
                    "--guide-file", gpath, "--intensity", "1.0",
                    "--steps", "10", "--out-json", oj]) == 0
        data = json.loads(oj.read_text())
        assert data["intensity"] == 1.0


def test_deviation_on_path(net_file, tmp_path):
    oj = tmp_path / "path.json"
    run(["traverse", "--net", net_file, "--intensity", "1.0", "--steps", "5",
         "--out-json", oj])
    oc = tmp_path / "dev.csv"
    assert run(["deviation", "--net", net_file, "--path-file", oj,
                "--restarts", "0", "--out", oc]) == 0
    lines = oc.read_text().splitlines()
    assert lines[0].startswith("#") and "upper bound" in lines[0]
    assert lines[1].split(",") == ["point_index", "intensity", "residual",
                                   "converged"]
    residuals = [float(l.split(",")[2]) for l in lines[2:]]
    assert len(residuals) == 6
    assert all(r <= 1e-10 for r in residuals)


def test_deviation_on_points(net_file, tmp_path):
    ppath = tmp_path / "pts.json"
    ppath.write_text(json.dumps([[0.0] * 8, [1.0] * 8]))
    oc = tmp_path / "dev.csv"
    assert run(["deviation", "--net", net_file, "--points-file", ppath,
                "--restarts", "2", "--out", oc]) == 0
    assert len(oc.read_text().splitlines()) == 4


def test_warpage_and_sweep_commands(net_file, tmp_path):
    oc = tmp_path / "warp.csv"
    oj = tmp_path / "warp.json"
    assert run(["warpage", "--net", net_file, "--k", "1,2", "--pairs", "5",
                "--pairs-od", "5", "--out-csv", oc, "--out-json", oj]) == 0
    assert len(oc.read_text().splitlines()) == 1 + 5 * 2 * 2
    oc2 = tmp_path / "sweep.csv"
    assert run(["eps-sweep", "--net", net_file, "--k", "2", "--eps",
                "0.05,0.1", "--pairs", "5", "--out-csv", oc2]) == 0
    assert len(oc2.read_text().splitlines()) == 1 + 2 * 2


def test_sv_hist_command(net_file, tmp_path):
    oc = tmp_path / "hist.csv"
    assert run(["sv-hist", "--net", net_file, "--points", "10", "--bins", "8",
                "--out-csv", oc]) == 0
    assert len(oc.read_text().splitlines()) == 9


def test_grid_command(net_file, tmp_path):
    out = tmp_path / "grid.json"
    assert run(["grid", "--net", net_file, "--i", "1", "--j", "2",
                "--half-extent", "2.0", "--n", "2", "--out", out]) == 0
    data = json.loads(out.read_text())
    grid = np.asarray(data["grid"])
    assert grid.shape == (5, 5, 8)
    assert np.allclose(grid[2, 2], data["w"])


def test_validate_command(net_file, capsys):
    assert run(["validate", "--net", net_file, "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3
    assert "FAIL" not in out


def test_cli_determinism(net_file, tmp_path):
    outs = []
    for tag in ("a", "b"):
        oj = tmp_path / f"{tag}.json"
        run(["traverse", "--net", net_file, "--intensity", "2.0",
             "--steps", "10", "--seed", "3", "--out-json", oj])
        outs.append(oj.read_bytes())
    assert outs[0] == outs[1]


def test_cli_does_not_mutate_inputs(net_file, tmp_path):
    before = net_file.read_bytes()
    run(["basis", "--net", net_file, "--out", tmp_path / "b.json"])
    run(["traverse", "--net", net_file, "--out-json", tmp_path / "t.json"])
    assert net_file.read_bytes() == before


def test_cli_malformed_net_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["basis", "--net", bad, "--out", tmp_path / "o.json"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    missing = tmp_path / "missing.json"
    assert run(["basis", "--net", missing, "--out", tmp_path / "o.json"]) == 2


def test_cli_rank_error_exit_code(tmp_path):
    # rank-deficient direction request fails cleanly with exit code 2
    net = netmod.MappingNetwork(
        (
            netmod.LayerSpec(
                np.array([[1.0, 0.0], [0.0, 0.0]]), np.zeros(2),
                netmod.IDENTITY, 1.0,
            ),
        )
    )
    npath = tmp_path / "rank1.json"
    netmod.save_network(net, npath)
    assert run(["traverse", "--net", npath, "--mode", "linear",
                "--direction", "2", "--out-json", tmp_path / "o.json"]) == 2
