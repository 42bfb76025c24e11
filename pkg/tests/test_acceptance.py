"""Acceptance suite: one test per criterion, each printing a PASS line with
the measured quantities. The Monte Carlo criteria (10, 11) are the slow ones,
a few minutes each on one core; frame counts can be raised (never lowered
below the contract) via OTFS_SIM_ACCEPT_FRAMES.
"""

import os

import numpy as np
import pytest

from otfs_sim.bpic import BpicWork, bpic_detect, bse, bso, dsc_combine, dsc_residual, mmse_init
from otfs_sim.channel import (
    NoiseSpec,
    dd_domain_channel_matrix,
    dd_domain_unitary,
    sample_channel,
    time_domain_channel_matrix,
    transmit,
)
from otfs_sim.chanest import estimate_channel
from otfs_sim.frame import (
    OTFSConfig,
    build_frame,
    build_region_map,
    devectorize,
    index_maps,
    qam_alphabet_1d,
    vectorize,
)
from otfs_sim.gdunn import (
    GdunnArchitecture,
    GdunnParams,
    StoppingMonitor,
    adam_step,
    backward,
    build_adjacency,
    forward,
    gdunn_run,
    init_params,
    loss_value,
)
from otfs_sim.harness import (
    CampaignSpec,
    DetectorSpec,
    results_csv_text,
    run_campaign,
    run_trial,
    write_trials_csv,
)
from otfs_sim.transforms import heisenberg, isfft, sfft, wigner

# Criterion 11's trend gaps are 2-4x per step and separate easily at the 5000
# frame contract minimum. Criterion 10 also has to separate GDUNN-BPIC from
# MMSE-BPIC at 30 dB, where the gap is ~7e-4 absolute (measured over 20000
# paired frames); the 95% CIs only clear each other around 20000 frames/point.
ACCEPT_FRAMES = max(5000, int(os.environ.get("OTFS_SIM_ACCEPT_FRAMES", "5000")))
SNR_ORDERING_FRAMES = max(ACCEPT_FRAMES, 20000)
ACCEPT_WORKERS = max(1, int(os.environ.get("OTFS_SIM_ACCEPT_WORKERS", "1")))
REF_CFG = dict(n_doppler=8, m_delay=8, k_p=3, l_p=3, k_max=1, l_max=2, mod_order=16)


def report(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num:>2}] {status}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def row_map(points):
    return {(p.detector, p.snr_db, p.pilot_power): p for p in points}


def separated(lo, hi):
    """True when lo's upper CI bound sits below hi's lower CI bound."""
    return lo.ser + lo.ci95 < hi.ser - hi.ci95


class TestCriterion01Loopback:
    def test_transform_loopback(self):
        rng = np.random.default_rng(101)
        worst_pair = worst_chain = 0.0
        for _ in range(1000):
            x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
            worst_pair = max(worst_pair, np.abs(sfft(isfft(x)) - x).max())
            y = sfft(wigner(heisenberg(isfft(x)), 8, 8))
            worst_chain = max(worst_chain, np.abs(y - x).max())
        ok = worst_pair < 1e-10 and worst_chain < 1e-10
        report(1, ok, f"1000 frames, SFFT∘ISFFT err {worst_pair:.2e}, full chain err {worst_chain:.2e}")


class TestCriterion02MatrixModel:
    def test_pipeline_equals_dd_matrix(self):
        rng = np.random.default_rng(102)
        worst = 0.0
        for _ in range(200):
            ch = sample_channel(rng, 4, 1, 2)
            h_time = time_domain_channel_matrix(ch, 8, 8)
            h_dd = dd_domain_channel_matrix(h_time, 8, 8)
            x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
            y_pipe = vectorize(sfft(wigner(h_time @ heisenberg(isfft(x)), 8, 8)))
            y_mat = h_dd @ vectorize(x)
            worst = max(worst, np.linalg.norm(y_pipe - y_mat) / np.linalg.norm(y_mat))
        report(2, worst < 1e-9, f"200 random channels, worst relative error {worst:.2e}")


class TestCriterion03EstimationExactness:
    def test_zero_noise_estimates_exact(self):
        rng = np.random.default_rng(103)
        cfg = OTFSConfig(snr_db=200.0, **REF_CFG)
        u = dd_domain_unitary(8, 8)
        worst = 0.0
        for trial in range(500):
            p = 1 + trial % 4
            ch = sample_channel(rng, p, cfg.k_max, cfg.l_max)
            frame = build_frame(cfg, np.zeros(cfg.n_data_symbols, complex))
            s = u.conj().T @ vectorize(frame.grid)
            r = transmit(s, time_domain_channel_matrix(ch, 8, 8), NoiseSpec(0.0), rng)
            est = estimate_channel(devectorize(u @ r, 8, 8), cfg, np.sqrt(cfg.sigma2))
            assert est.n_paths == p
            got = {(q.delay_idx, q.doppler_idx): q.gain for q in est.paths}
            for path in ch.paths:
                key = (path.delay_idx, path.doppler_idx)
                assert key in got
                worst = max(worst, abs(got[key] - path.gain))
        report(3, worst < 1e-8, f"500 trials, P-hat always exact, worst gain error {worst:.2e}")


class TestCriterion04DimensionFormulas:
    def test_closed_forms(self):
        cfg = OTFSConfig(**REF_CFG)
        ok = cfg.n_data_symbols == 39 and cfg.n_obs_symbols == 55
        checked = 0
        for n in (4, 8, 16):
            for m in (4, 8, 16):
                for k_max in (0, 1, 2):
                    for l_max in (0, 1, 2, 3):
                        if 4 * k_max > n - 1 or 2 * l_max > m - 1 or k_max > n // 2 or l_max > m - 1:
                            continue
                        c = OTFSConfig(n_doppler=n, m_delay=m, k_p=2 * k_max, l_p=l_max,
                                       k_max=k_max, l_max=l_max)
                        maps = index_maps(c)
                        ok &= maps.data_tx_indices.size == n * m - (2 * l_max + 1) * (4 * k_max + 1)
                        ok &= maps.rx_obs_indices.size == n * m - (l_max + 1) * (2 * k_max + 1)
                        rm = build_region_map(c)
                        ok &= int(np.count_nonzero(rm >= 0)) == n * m
                        checked += 1
        report(4, ok, f"U/2=39, V/2=55 at the reference config; closed forms hold for {checked} sweep configs")


class TestCriterion05GradientCorrectness:
    def test_finite_difference_agreement(self):
        step = 1e-5
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(500 + seed)
            h = rng.standard_normal((8, 6))
            x = rng.choice(qam_alphabet_1d(16), size=6)
            from otfs_sim.chanest import RealLinearModel

            m = RealLinearModel(y=h @ x + 0.05 * rng.standard_normal(8), h=h, sigma2=0.0025,
                                constellation_1d=qam_alphabet_1d(16))
            arch = GdunnArchitecture(input_sizes=(4, 5, 6), output_sizes=(5, 6, 6),
                                     alpha=3 / np.sqrt(10), use_graph=True)
            p = init_params(arch, build_adjacency(h), rng)
            grad = backward(p, m)
            for i in range(p.theta.size):
                keep = p.theta[i]
                p.theta[i] = keep + step
                up = loss_value(m, forward(p))
                p.theta[i] = keep - step
                dn = loss_value(m, forward(p))
                p.theta[i] = keep
                fd = (up - dn) / (2 * step)
                rel = abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), 1e-6)
                worst = max(worst, rel)
        report(5, worst < 1e-5, f"20 seeds, every parameter, worst relative FD error {worst:.2e}")


class TestCriterion06AdamOracle:
    def test_two_hand_computed_steps(self):
        arch = GdunnArchitecture(input_sizes=(1,), output_sizes=(1,), alpha=1.0, use_graph=False)
        p = GdunnParams(arch=arch, theta=np.zeros(2), z1=np.zeros(1), adjacency=np.eye(1))
        g = np.array([1.0, -2.0])
        adam_step(p, g, lr=0.01)
        want1 = -0.01 * np.array([1.0, -2.0]) / (np.sqrt(np.array([1.0, 4.0])) + 1e-8)
        err1 = np.abs(p.theta - want1).max()
        adam_step(p, g, lr=0.01)
        m2 = 0.9 * 0.1 * g + 0.1 * g
        v2 = 0.999 * 0.001 * g * g + 0.001 * g * g
        want2 = want1 - 0.01 * (m2 / (1 - 0.81)) / (np.sqrt(v2 / (1 - 0.999**2)) + 1e-8)
        err2 = np.abs(p.theta - want2).max()
        report(6, err1 < 1e-12 and err2 < 1e-12, f"step errors {err1:.2e}, {err2:.2e}")


class TestCriterion07StoppingRule:
    def test_stop_semantics(self):
        rng = np.random.default_rng(107)
        h = rng.standard_normal((8, 6))
        from otfs_sim.chanest import RealLinearModel

        m = RealLinearModel(y=rng.standard_normal(8), h=h, sigma2=0.01,
                            constellation_1d=qam_alphabet_1d(16))
        arch = GdunnArchitecture(input_sizes=(4, 5, 6), output_sizes=(5, 6, 6),
                                 alpha=3 / np.sqrt(10), use_graph=False)
        s = 9
        # constant-output network, realized exactly: a frozen optimizer never
        # moves the parameters, so the first S outputs are identical.
        # (A zero-residual construction is not bit-exact here: Adam rescales
        # even ulp-sized residual gradients to full lr-sized steps.)
        res_const = gdunn_run(m, arch, StoppingMonitor(s, 1e-3, 50),
                              np.random.default_rng(3), lr=0.0)
        # an effectively infinite threshold stops any network at the first check
        res_huge = gdunn_run(m, arch, StoppingMonitor(s, 1e9, 50), np.random.default_rng(2))
        res_zero = gdunn_run(m, arch, StoppingMonitor(s, 0.0, 37), np.random.default_rng(1))
        ok = res_const.iterations == s and res_huge.iterations == s and res_zero.iterations == 37
        report(7, ok, f"constant output stops at i=S={res_const.iterations} (huge threshold: {res_huge.iterations}), threshold 0 runs to T_max={res_zero.iterations}")


class TestCriterion08BpicOracles:
    def test_component_oracles(self):
        rng = np.random.default_rng(108)
        from otfs_sim.chanest import RealLinearModel

        a = qam_alphabet_1d(16)
        h = rng.standard_normal((10, 6))
        x = rng.choice(a, size=6)
        y = h @ x + 0.1 * rng.standard_normal(10)
        m = RealLinearModel(y=y, h=h, sigma2=0.01, constellation_1d=a)
        work = BpicWork.from_model(m)
        x_hat = rng.standard_normal(6)
        v = rng.random(6)

        mu, sig = bso(work, x_hat, v)
        mu_o = np.empty(6)
        sig_o = np.empty(6)
        resid = y - h @ x_hat
        for q in range(6):
            hq = h[:, q]
            n2 = hq @ hq
            mu_o[q] = x_hat[q] + hq @ resid / n2
            acc = sum((hq @ h[:, j]) ** 2 * v[j] for j in range(6) if j != q)
            sig_o[q] = (acc + n2 * 0.01) / n2**2
        e_bso = max(np.abs(mu - mu_o).max(), np.abs(sig - sig_o).max())

        xb, vb = bse(mu, sig, a)
        xb_o = np.empty(6)
        vb_o = np.empty(6)
        for q in range(6):
            w = np.exp(-((mu[q] - a) ** 2) / (2 * sig[q]))
            w /= w.sum()
            xb_o[q] = w @ a
            vb_o[q] = w @ (a - xb_o[q]) ** 2
        e_bse = max(np.abs(xb - xb_o).max(), np.abs(vb - vb_o).max())

        eps_prev = dsc_residual(work, x_hat)
        eps_cur = dsc_residual(work, xb)
        _, x_new, v_new = dsc_combine(eps_prev, eps_cur, x_hat, xb, v, vb)
        rho_o = eps_prev / (eps_cur + eps_prev)
        e_dsc = max(
            np.abs(x_new - ((1 - rho_o) * x_hat + rho_o * xb)).max(),
            np.abs(v_new - ((1 - rho_o) * v + rho_o * vb)).max(),
        )

        xt, vt = bse(np.array([0.3]), np.array([1.0]), np.array([-1.0, 1.0]))
        e_tanh = max(abs(xt[0] - np.tanh(0.3)), abs(vt[0] - (1 - np.tanh(0.3) ** 2)))

        worst = max(e_bso, e_bse, e_dsc, e_tanh)
        report(8, worst < 1e-12, f"BSO/BSE/DSC transcription + BPSK tanh, worst error {worst:.2e}")


class TestCriterion09NoiselessEndToEnd:
    def test_all_detectors_zero_errors(self):
        cfg = OTFSConfig(snr_db=300.0, **REF_CFG)
        dets = tuple(DetectorSpec(k) for k in ("MMSE", "MMSE-BPIC", "DUNN-BPIC", "GDUNN-BPIC"))
        errors = 0
        for fi in range(500):
            rec = run_trial(cfg, dets, "perfect", 4, 109, 0, fi)
            errors += sum(rec.errors.values())
        report(9, errors == 0, f"500 noiseless frames, perfect CSI, total errors {errors}")


@pytest.fixture(scope="module")
def snr_campaign(tmp_path_factory):
    spec = CampaignSpec(
        config=OTFSConfig(**REF_CFG),
        snr_list=(20.0, 25.0, 30.0),
        pilot_power_list=(1.0,),
        csi_mode="estimated",
        n_frames=SNR_ORDERING_FRAMES,
        base_seed=110,
        detectors=(DetectorSpec("MMSE"), DetectorSpec("MMSE-BPIC"), DetectorSpec("GDUNN-BPIC")),
    )
    res = run_campaign(spec, workers=ACCEPT_WORKERS, collect_trials=True)
    out = tmp_path_factory.mktemp("accept") / "snr_results.csv"
    with open(out, "w") as fh:
        fh.write(results_csv_text(res.points))
    # keep artifacts for the plotting tool's acceptance test
    keep = os.path.join(os.path.dirname(__file__), "artifacts")
    os.makedirs(keep, exist_ok=True)
    with open(os.path.join(keep, "fig_ser_vs_snr.csv"), "w") as fh:
        fh.write(results_csv_text(res.points))
    return res


class TestCriterion10SnrOrdering:
    def test_detector_ordering_with_cis(self, snr_campaign):
        rows = row_map(snr_campaign.points)
        details = []
        ok = True
        for snr in (20.0, 25.0, 30.0):
            g = rows[("GDUNN-BPIC", snr, 1.0)]
            b = rows[("MMSE-BPIC", snr, 1.0)]
            m = rows[("MMSE", snr, 1.0)]
            ok &= g.ser <= b.ser <= m.ser
            if snr >= 25.0:
                ok &= separated(g, b) and separated(b, m)
            details.append(f"{snr:g}dB: {g.ser:.4f} <= {b.ser:.4f} <= {m.ser:.4f}")
        report(10, ok, f"{SNR_ORDERING_FRAMES} frames/point; " + "; ".join(details))


class TestCriterion11PilotPowerTrend:
    def test_ser_decreases_with_pilot_power(self):
        spec = CampaignSpec(
            config=OTFSConfig(**REF_CFG),
            snr_list=(25.0,),
            pilot_power_list=(1.0, 2.0, 4.0),
            csi_mode="estimated",
            n_frames=ACCEPT_FRAMES,
            base_seed=111,
            detectors=(DetectorSpec("MMSE"), DetectorSpec("MMSE-BPIC"), DetectorSpec("GDUNN-BPIC")),
        )
        res = run_campaign(spec, workers=ACCEPT_WORKERS)
        rows = row_map(res.points)
        ok = True
        details = []
        for kind in ("MMSE", "MMSE-BPIC", "GDUNN-BPIC"):
            seq = [rows[(kind, 25.0, pp)] for pp in (1.0, 2.0, 4.0)]
            ok &= separated(seq[1], seq[0]) and separated(seq[2], seq[1])
            details.append(f"{kind}: " + " > ".join(f"{r.ser:.4f}" for r in seq))
        report(11, ok, f"{ACCEPT_FRAMES} frames/point at 25 dB; " + "; ".join(details))


class TestCriterion12IterationCounts:
    def test_gdunn_needs_fewer_iterations(self):
        cfg = OTFSConfig(snr_db=28.0, **REF_CFG)
        dets = (DetectorSpec("DUNN-BPIC"), DetectorSpec("GDUNN-BPIC"))
        g_iters, d_iters = [], []
        for fi in range(200):
            rec = run_trial(cfg, dets, "estimated", 4, 112, 0, fi)
            g_iters.append(rec.unn_iters["GDUNN-BPIC"])
            d_iters.append(rec.unn_iters["DUNN-BPIC"])
        med_g, med_d = np.median(g_iters), np.median(d_iters)
        ratio = med_g / med_d
        keep = os.path.join(os.path.dirname(__file__), "artifacts")
        os.makedirs(keep, exist_ok=True)
        trials = [
            {"detector": k, "snr_db": 28.0, "pilot_power": 1.0, "csi_mode": "estimated",
             "frame_index": i, "errors": 0, "symbols": 39, "unn_iters": it}
            for k, seq in (("GDUNN-BPIC", g_iters), ("DUNN-BPIC", d_iters))
            for i, it in enumerate(seq)
        ]
        write_trials_csv(trials, os.path.join(keep, "fig_iters_trials.csv"))
        report(
            12,
            med_g < med_d,
            f"200 frames at 28 dB: median T_GDUNN={med_g:.0f} < T_DUNN={med_d:.0f}; "
            f"ratio {ratio:.2f} (reported against the ~40% fewer-iterations figure, not gated)",
        )


class TestCriterion13Reproducibility:
    def test_byte_identical_csv_across_workers(self, tmp_path):
        spec = CampaignSpec(
            config=OTFSConfig(**REF_CFG),
            snr_list=(22.0, 26.0),
            pilot_power_list=(1.0,),
            csi_mode="estimated",
            n_frames=24,
            base_seed=113,
            detectors=(DetectorSpec("MMSE"), DetectorSpec("MMSE-BPIC"),
                       DetectorSpec("GDUNN-BPIC", window_size=20, t_max=120)),
        )
        outputs = {}
        trials = {}
        for workers in (1, 2):
            res = run_campaign(spec, workers=workers, collect_trials=True)
            text = results_csv_text(res.points)
            # wall_ms is measured time, the one physically nondeterministic
            # column; everything else must match byte for byte
            outputs[workers] = "\n".join("," .join(l.split(",")[:-1]) for l in text.strip().split("\n"))
            path = tmp_path / f"trials_{workers}.csv"
            write_trials_csv(res.trials, str(path))
            trials[workers] = path.read_bytes()
        ok = outputs[1] == outputs[2] and trials[1] == trials[2]
        report(13, ok, "workers 1 vs 2: results.csv (wall_ms projected out) and trials.csv byte-identical")
