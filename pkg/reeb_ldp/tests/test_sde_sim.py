import numpy as np
from django.test import SimpleTestCase

from ..errors import BoxExit, StepTooLarge
from ..simulation.sde_sim import SimulationConfig, integrate_flow, resolve_dt, simulate, simulate_batch
from .helpers import system


def config(**kwargs):
    base = dict(epsilon=0.01, beta=0.5, horizon=1.0, x0=(1.0, 1.0), seed=7)
    base.update(kwargs)
    base.setdefault('dt_fast', resolve_dt(base['epsilon'], base['beta'], 2 * np.pi))
    return SimulationConfig(**base)


class StepPolicyTests(SimpleTestCase):
    def test_resolved_step_respects_the_ceiling(self):
        dt = resolve_dt(0.01, 0.5, 2 * np.pi)
        self.assertAlmostEqual(dt, 0.05 * 0.1)
        self.assertEqual(resolve_dt(0.01, 0.5, 0.1, dt_user=1e-4), 1e-4)
        self.assertAlmostEqual(resolve_dt(0.01, 0.5, 0.1), 0.02 * 0.1 * 0.1)

    def test_step_too_large(self):
        with self.assertRaises(StepTooLarge):
            config(dt_fast=0.01).validate()

    def test_bad_parameters(self):
        for kwargs in ({'beta': 1.0}, {'epsilon': -1.0, 'dt_fast': 1e-3}, {'record_stride': 0}, {'scheme': 'milstein'}):
            with self.subTest(**kwargs), self.assertRaises(ValueError):
                config(**kwargs).validate()

    def test_record_grid(self):
        c = config(record_stride=7)
        self.assertEqual(c.n_steps, 200)
        self.assertEqual(c.record_steps[-1], 200)
        self.assertEqual(len(c.record_steps), 30)


class SimulationTests(SimpleTestCase):
    def setUp(self):
        self.s = system('harmonic')

    def test_same_seed_same_trajectory(self):
        a, b = simulate(self.s, config()), simulate(self.s, config())
        np.testing.assert_array_equal(a.states, b.states)
        c = simulate(self.s, config(seed=8))
        self.assertFalse(np.array_equal(a.states, c.states))
        d = simulate(self.s, config(), trajectory=1)
        self.assertFalse(np.array_equal(a.states, d.states))

    def test_timescales_agree_after_relabelling_time(self):
        rescaled = simulate(self.s, config())
        original = simulate(self.s, config(timescale='original'))
        np.testing.assert_allclose(original.states, rescaled.states, atol=1e-9)
        np.testing.assert_allclose(original.times, rescaled.times * 0.01 ** -0.5)
        np.testing.assert_allclose(original.drift_series, rescaled.drift_series, atol=1e-12)

    def test_ito_decomposition(self):
        batch = simulate_batch(self.s, config(), 200)
        residual = batch.h - batch.h[:, :1] - batch.drift - batch.martingale
        self.assertLess(np.std(residual[:, -1]), 0.1 * np.std(batch.martingale[:, -1]))
        self.assertLess(abs(np.mean(residual[:, -1])), 0.02)
        # AH = 1 for the harmonic oscillator with sigma = I
        np.testing.assert_allclose(batch.drift[:, -1], 0.01 ** 0.5, rtol=1e-9)
        self.assertLess(np.max(np.abs(batch.trajectory(0).ito_residual())), 0.2)

    def test_without_noise_the_path_follows_the_flow(self):
        quiet = system('harmonic', sigma_zero=True)
        record = simulate(quiet, config())
        flow = integrate_flow(quiet, (1.0, 1.0), 10.0)
        np.testing.assert_allclose(record.states[-1], flow.states[-1], atol=1e-5)
        self.assertLess(np.max(record.qv_series), 1e-12)
        self.assertEqual(np.max(np.abs(record.martingale_series)), 0.0)
        self.assertEqual(record.summary()['exit_status'], 'ok')

    def test_exited_paths_freeze(self):
        c = config(epsilon=0.1, x0=(1.0, 0.0), dt_fast=resolve_dt(0.1, 0.5, 2 * np.pi))
        batch = simulate_batch(self.s, c, 64, h_limit=0.6)
        self.assertGreater(batch.exited.sum(), 0)
        k = int(np.argmax(batch.exited))
        after = batch.times > batch.exit_time[k]
        self.assertTrue(np.all(batch.states[k, after] == batch.states[k, -1]))
        self.assertLessEqual(batch.h[k, -1], 0.6)
        record = batch.trajectory(k)
        self.assertEqual(record.exit_status, 'box_exit')
        with self.assertRaises(BoxExit):
            record.raise_for_status()

    def test_flow_conserves_energy(self):
        record = integrate_flow(system('doublewell'), (0.5, 0.3), 20.0)
        np.testing.assert_allclose(record.h_series, record.h_series[0], atol=1e-9)
        with self.assertRaises(BoxExit):
            integrate_flow(self.s, (5.0, 0.0), 1.0)
