import json

import numpy as np
import pytest

from regime_pcmci.core import DataError
from regime_pcmci.driver import DriverConfig, fit_annealed
from regime_pcmci.io import (ConfigError, RunConfig, fit_from_dict, fit_to_dict, load_config, read_truth,
                             write_bundle)
from regime_pcmci.pcmci import PcmciConfig
from regime_pcmci.synthetic import get_experiment


class TestRunConfig:
    def test_table_aliases(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"N_K": 3, "N_C": 40, "N_Q": 20, "N_A": 50, "tau_max": 3, "alpha": 0.01,
                                 "alpha_PC": 0.2, "N_R": 5}))
        cfg = load_config(p)
        assert (cfg.n_regimes, cfg.switch_budget, cfg.n_iterations, cfg.n_annealings) == (3, 40, 20, 50)
        assert cfg.n_realisations == 5 and cfg.alpha_pc == 0.2
        assert cfg.driver().pcmci == PcmciConfig(3, 0.01, 0.2)

    @pytest.mark.parametrize("data", [{"bogus": 1}, {"alpha": 0.5}, {"N_R": 0}, {"N_A": 0}, {"tau_max": "x"}])
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(data)

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_hash_ignores_runtime_fields(self):
        a = RunConfig(n_jobs=1, data="a.csv")
        b = RunConfig(n_jobs=8, data="b.csv")
        assert a.hash() == b.hash()
        assert a.hash() != RunConfig(seed=1).hash()


class TestBundles:
    def test_round_trip(self, tmp_path):
        series, truth = get_experiment("lag").generate(1)
        write_bundle(tmp_path / "b", series, truth, "lag", 1)
        back = read_truth(tmp_path / "b" / "truth.json")
        np.testing.assert_array_equal(back.series.values, series.values)
        np.testing.assert_array_equal(back.truth.assignment.gamma, truth.assignment.gamma)
        np.testing.assert_array_equal(back.truth.coefficients.phi, truth.coefficients.phi)
        assert back.data["n_c"] == truth.assignment.n_c

    def test_length_mismatch(self, tmp_path):
        series, truth = get_experiment("lag").generate(1)
        write_bundle(tmp_path, series, truth, "lag", 1)
        doc = json.loads((tmp_path / "truth.json").read_text())
        doc["windows"]["lengths"][0] += 1
        (tmp_path / "truth.json").write_text(json.dumps(doc))
        with pytest.raises(DataError):
            read_truth(tmp_path / "truth.json")

    def test_fit_round_trip(self):
        series, _ = get_experiment("sign_x1x2").generate(0)
        best = fit_annealed(series, DriverConfig(2, 40, 20, 1, PcmciConfig(3, 0.01, 0.2))).best
        back = fit_from_dict(json.loads(json.dumps(fit_to_dict(best, 3, 40))))
        np.testing.assert_array_equal(back.assignment.labels, best.assignment.labels)
        np.testing.assert_array_equal(back.coefficients.phi, best.coefficients.phi)
        assert back.objective == best.objective and back.converged == best.converged
