"""End-to-end acceptance suite.

Each test covers one numbered acceptance criterion at its stated
tolerance and prints a single PASS line when it holds; run with
``pytest -s tests/test_acceptance.py`` to see the lines.
"""

import time

import numpy as np
import pytest

from polarcube import (
    CaptureConfig,
    ConfigurationError,
    MeasurementConfig,
    NoiseModel,
    StokesImage,
    apply,
    burst_average,
    decompose,
    default_qwp_angles,
    extract_patches,
    inr_init,
    inr_loss_and_grads,
    inr_train,
    is_valid,
    lp_mueller,
    pca_decode,
    pca_encode,
    pca_fit,
    pca_fit_image,
    quality,
    random_scene,
    read_spsi,
    reconstruct_image,
    retarder_mueller,
    rotate_mueller,
    simulate_hyperspectral,
    smooth_scene,
    solve_stokes,
    system_matrix,
    truncate_codebook,
    uniform_scene,
    wrap_aolp_gradient,
    write_spsi,
)
from polarcube.pca import bpp
from polarcube.stokes import features

RNG = np.random.default_rng(20240612)


def report(criterion, detail):
    print(f"PASS criterion {criterion}: {detail}")


def test_criterion_1_roundtrip_fidelity():
    scene = random_scene(128, 128, 21, np.random.default_rng(1),
                         rho_max=0.95, s0_range=(0.2, 1.0))
    start = time.perf_counter()
    raw = simulate_hyperspectral(scene, default_qwp_angles())
    cube = reconstruct_image(raw)
    elapsed = time.perf_counter() - start
    rel = float(np.max(np.abs(cube.data - scene.data)) / scene.data[..., 0].max())
    assert rel < 1e-5
    assert elapsed < 10.0
    report(1, f"max relative error {rel:.2e} in {elapsed:.2f}s (128x128x21, 4 QWP angles)")


def test_criterion_2_rank_discrimination():
    lp_only = CaptureConfig(
        [MeasurementConfig(0.0, 0.0, np.deg2rad(a)) for a in (0, 45, 90, 135)]
    )
    with pytest.raises(ConfigurationError, match="rank 3"):
        system_matrix(lp_only)
    system = system_matrix(CaptureConfig.hyperspectral(default_qwp_angles()))
    assert system.rank == 4
    eigenvalues = np.linalg.eigvalsh(system.matrix.T @ system.matrix)
    oracle = float(np.sqrt(eigenvalues[-1] / eigenvalues[0]))
    assert system.condition_number == pytest.approx(oracle, rel=1e-9)
    report(2, f"LP-only rejected as rank 3; QWP set rank 4, cond {system.condition_number:.6f} "
              f"matches eigenvalue oracle to 1e-9")


def test_criterion_3_burst_averaging_law():
    scene = random_scene(24, 24, 2, np.random.default_rng(5),
                         rho_max=0.7, s0_range=(0.4, 1.0), wavelengths=[500.0, 600.0])
    clean = simulate_hyperspectral(scene, default_qwp_angles())
    reference = StokesImage(reconstruct_image(clean).data)
    counts = (1, 4, 16, 100)
    deltas = []
    for trial in range(20):
        stacks = []
        for shot in range(max(counts)):
            noise = NoiseModel(gaussian_sigma=0.05, rng_seed=trial * 1000 + shot,
                               saturation_level=100.0, black_level=-100.0)
            stacks.append(
                simulate_hyperspectral(scene, default_qwp_angles(), noise=noise).frames
            )
        psnrs = {}
        for n in counts:
            averaged = type(clean)(burst_average(stacks[:n]), clean.config,
                                   tags=clean.tags, wavelengths=clean.wavelengths)
            cube = StokesImage(reconstruct_image(averaged).data)
            psnrs[n] = quality(reference, cube).psnr
        deltas.append([psnrs[n] - psnrs[1] for n in counts[1:]])
    med = np.median(np.asarray(deltas), axis=0)
    for n, gain in zip(counts[1:], med):
        assert abs(gain - 10 * np.log10(n)) <= 0.7
    report(3, "median PSNR gains "
              + ", ".join(f"N={n}: {g:+.2f} dB (law {10 * np.log10(n):+.2f})"
                          for n, g in zip(counts[1:], med))
              + " over 20 seeds")


def test_criterion_4_pca_exactness_and_monotonicity():
    img = random_scene(64, 64, 3, np.random.default_rng(3))
    patch = 2
    d = patch * patch * 3 * 4
    codebook = pca_fit_image(img, patch, d)
    mses = []
    for k in range(1, d + 1):
        decoded = pca_decode(pca_encode(img, truncate_codebook(codebook, k)))
        mses.append(float(np.mean((decoded.data - img.data) ** 2)))
    assert mses[-1] < 1e-12
    assert all(a >= b - 1e-15 for a, b in zip(mses, mses[1:]))

    r = 5
    basis, _ = np.linalg.qr(np.random.default_rng(4).normal(size=(d, r)))
    coeffs = np.random.default_rng(5).normal(size=(256, r))
    flat = coeffs @ basis.T + 1.0
    data = flat.reshape(16, 16, patch, patch, 3, 4).transpose(0, 2, 1, 3, 4, 5).reshape(
        32, 32, 3, 4
    )
    low_rank = StokesImage(data)
    rank_cb = pca_fit_image(low_rank, patch, r)
    decoded = pca_decode(pca_encode(low_rank, rank_cb))
    rank_mse = float(np.mean((decoded.data - low_rank.data) ** 2))
    assert rank_mse < 1e-10

    grid = extract_patches(StokesImage(np.zeros((512, 612, 1, 4), dtype=np.float32)), 10)
    assert grid.shape[0] == 51 * 61
    report(4, f"K=D mse {mses[-1]:.1e}, monotone over K=1..{d}, rank-{r} data mse "
              f"{rank_mse:.1e}, 512x612/P=10 -> 51x61 patches")


def test_criterion_5_inr_training():
    # gradient check on a width-8 network
    model = inr_init(2, 8, seed=3, grid_shape=(4, 4, 2))
    coords = np.array([[0, 0, 0], [1, 2, 1], [3, 3, 0], [2, 1, 1], [0, 3, 1]], dtype=float)
    targets = np.random.default_rng(8).normal(size=(5, 4))
    _, w_grads, b_grads = inr_loss_and_grads(model, coords, targets)
    eps, worst = 1e-6, 0.0
    for params, grads in ((model.weights, w_grads), (model.biases, b_grads)):
        for p, g in zip(params, grads):
            flat_p, flat_g = p.reshape(-1), g.reshape(-1)
            for idx in range(flat_p.size):
                old = flat_p[idx]
                flat_p[idx] = old + eps
                lo_p, _, _ = inr_loss_and_grads(model, coords, targets)
                flat_p[idx] = old - eps
                lo_m, _, _ = inr_loss_and_grads(model, coords, targets)
                flat_p[idx] = old
                fd = (lo_p - lo_m) / (2 * eps)
                worst = max(worst, abs(fd - flat_g[idx]) / max(abs(fd), abs(flat_g[idx]), 1e-8))
    assert worst < 1e-4

    # constant-image fit
    constant = uniform_scene(8, 8, 2, stokes=(0.5, 0.1, -0.05, 0.02))
    const_model = inr_init(2, 16, seed=3)
    _, const_report = inr_train(const_model, constant, steps=500, lr=0.1)
    assert const_report.final_mse < 1e-8

    # smooth 64x64x3 cube to 40 dB within budget
    cube = smooth_scene(64, 64, 3, np.random.default_rng(42), cycles=1.0, rho_max=0.5)
    model = inr_init(4, 64, seed=7, dtype=np.float32)
    steps = 8000
    assert steps <= 20000
    start = time.perf_counter()
    model, train_report = inr_train(model, cube, steps=steps, lr=1e-2,
                                    batch_size=4096, seed=7)
    elapsed = time.perf_counter() - start
    assert train_report.final_psnr >= 40.0
    assert elapsed < 300.0
    report(5, f"gradcheck {worst:.1e}, constant fit {const_report.final_mse:.1e} in 500 "
              f"steps, smooth cube {train_report.final_psnr:.1f} dB in {steps} steps / "
              f"{elapsed:.0f}s")


def test_criterion_6_algebraic_invariants():
    angles = RNG.uniform(-np.pi, np.pi, size=100)
    stokes = random_scene(10, 10, 1, np.random.default_rng(11)).data.reshape(-1, 4)
    worst = {"projector": 0.0, "qwp4": 0.0, "rotation": 0.0, "dop": 0.0}
    for theta in angles:
        lp = lp_mueller(theta)
        worst["projector"] = max(worst["projector"], np.max(np.abs(lp @ lp - lp)))
        q = retarder_mueller(theta, np.pi / 2)
        worst["qwp4"] = max(worst["qwp4"], np.max(np.abs(q @ q @ q @ q - np.eye(4))))
        worst["rotation"] = max(
            worst["rotation"],
            np.max(np.abs(rotate_mueller(lp_mueller(0.0), theta) - lp)),
        )
        rho_in = features(stokes).rho
        rho_out = features(apply(q, stokes)).rho
        worst["dop"] = max(worst["dop"], np.max(np.abs(rho_out - rho_in)))
    for name, value in worst.items():
        assert value < 1e-12, name
    report(6, "worst deviations over 100 angles: "
              + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_7_decomposition_conservation():
    vectors = random_scene(1000, 1000, 1, np.random.default_rng(13),
                           rho_max=0.999).data.reshape(-1, 4)
    assert vectors.shape[0] == 10**6
    pol, unpol = decompose(vectors)
    err = np.abs(pol + unpol - vectors[:, 0])
    assert np.all(err <= 2 * np.spacing(vectors[:, 0]))
    sample = vectors[:2000]
    pol0, _ = decompose(sample)
    for _ in range(25):
        q = retarder_mueller(RNG.uniform(-np.pi, np.pi), RNG.uniform(0, 2 * np.pi))
        pol1, _ = decompose(apply(q, sample))
        assert np.max(np.abs(pol1 - pol0)) < 1e-9
    report(7, "P + U = s0 to one rounding step on 1e6 vectors; P retarder-invariant to 1e-9")


def test_criterion_8_validity_filtering():
    assert not is_valid([1.0, 0.8, 0.8, 0.0])
    scene = random_scene(32, 32, 3, np.random.default_rng(8), rho_max=0.9,
                         wavelengths=[450.0, 550.0, 650.0])
    noise = NoiseModel(gaussian_sigma=0.002, rng_seed=9)
    raw = simulate_hyperspectral(scene, default_qwp_angles(), noise=noise)
    cube = reconstruct_image(raw)
    fraction = cube.valid_fraction()
    assert fraction >= 0.99
    report(8, f"overpolarized vector flagged invalid; mild-noise run {fraction:.4f} valid")


def test_criterion_9_aolp_wrapping():
    angles = RNG.uniform(-np.pi / 2 + 1e-9, np.pi / 2, size=(10**5, 2))
    wrapped = wrap_aolp_gradient(angles[:, 1] - angles[:, 0])
    assert np.all(np.abs(wrapped) <= np.pi / 2)
    pair = wrap_aolp_gradient(np.array((np.pi / 2 - 0.01) - (-np.pi / 2 + 0.01)))
    assert abs(float(pair) - (-0.02)) < 1e-15
    report(9, f"1e5 wrapped gradients in [-pi/2, pi/2]; boundary pair -> {float(pair):.17f}")


def test_criterion_10_container_and_determinism(tmp_path):
    cube = random_scene(9, 11, 4, np.random.default_rng(21),
                        wavelengths=500.0 + 10 * np.arange(4))
    cube.data = cube.data.astype(np.float32)
    cube.mask = np.random.default_rng(22).uniform(size=(9, 11, 4)) > 0.25
    path = tmp_path / "cube.spsi"
    write_spsi(path, cube)
    loaded = read_spsi(path)
    assert np.array_equal(loaded.data, cube.data)
    assert np.array_equal(loaded.mask, cube.mask)

    def run(out):
        scene = random_scene(8, 8, 2, np.random.default_rng(30),
                             wavelengths=[500.0, 600.0])
        noise = NoiseModel(gaussian_sigma=0.01, rng_seed=30)
        write_spsi(out, simulate_hyperspectral(scene, default_qwp_angles(), noise=noise))

    run(tmp_path / "a.spsi")
    run(tmp_path / "b.spsi")
    assert (tmp_path / "a.spsi").read_bytes() == (tmp_path / "b.spsi").read_bytes()
    report(10, "cube round trip bit-exact; seeded rerun byte-identical")


def test_criterion_11_bpp_accounting():
    h, w, c = 512, 612, 21
    raw_bits = h * w * c * 4 * 32
    value = bpp(raw_bits, w, h)
    assert value == 2688
    report(11, f"raw hyperspectral cube reports {value:.0f} BPP")
