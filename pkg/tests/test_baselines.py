import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import ortho_group

from baselines import (
    ABLATION_CONFIGS,
    CYCLEGAN_FLAGS,
    RESULT_COLUMNS,
    AblationFlags,
    aggregate,
    cca_brute_force,
    cca_fit,
    cca_transfer,
    cca_transfer_states,
    cyclegan_baseline,
    run_ablation_table,
    sweep,
    write_results,
)
from config import AlignHyperparams
from conftest import make_trajectory
from errors import DimensionError
from utils import file_manager


# ---- CCA ----

def test_identical_views_are_fully_correlated(rng):
    x = rng.normal(scale=10.0, size=(500, 3))
    model = cca_fit(x, x)
    assert np.all(model.correlations > 0.999)


def test_orthogonal_rotation_is_recovered(rng):
    x = rng.normal(size=(2000, 4))
    rotation = ortho_group.rvs(4, random_state=7)
    y = x @ rotation + np.array([1.0, -2.0, 0.5, 3.0])
    model = cca_fit(x, y)
    assert_allclose(cca_transfer_states(model, x[:50]), y[:50], atol=1e-3)


def test_independent_views_are_uncorrelated():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(10_000, 4))
    y = rng.normal(size=(10_000, 4))
    assert cca_fit(x, y).correlations[0] < 0.1


@pytest.mark.parametrize('seed', range(20))
def test_correlations_match_generalized_eigenproblem(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 201))
    p, q = (int(d) for d in rng.integers(1, 5, size=2))
    x = rng.normal(size=(n, p))
    y = x[:, :1] @ rng.normal(size=(1, q)) + rng.normal(size=(n, q))
    assert_allclose(cca_fit(x, y).correlations, cca_brute_force(x, y), atol=1e-6)


def test_expert_mean_maps_to_agent_mean(rng):
    x = rng.normal(size=(400, 4))
    y = rng.normal(loc=2.0, size=(300, 2))
    model = cca_fit(x, y, rng=np.random.default_rng(3))
    assert model.shared_dim == 2
    assert_allclose(cca_transfer_states(model, model.mean_e[None, :]), model.mean_a[None, :], atol=1e-10)


def test_unpaired_fit_truncates_to_shorter_set(rng):
    model = cca_fit(rng.normal(size=(50, 3)), rng.normal(size=(80, 3)), rng=rng)
    assert model.proj_e.shape == (3, 3)
    with pytest.raises(DimensionError, match='equal row counts'):
        cca_fit(rng.normal(size=(50, 3)), rng.normal(size=(80, 3)))


def test_cca_transfer_lays_out_agent_observations(rng):
    model = cca_fit(rng.normal(size=(200, 6)), rng.normal(size=(200, 4)), rng=rng)
    demo = make_trajectory(length=7, state_dim=8)
    (moved,) = cca_transfer(model, [demo], expert_goal_dims=(6, 7), agent_goal_dims=(4, 5), goal_rotation=np.pi)
    assert moved.domain == 'A' and moved.length == 7
    assert moved.state_dim == 6
    assert_allclose(moved.states[:, 4:], -demo.states[:, 6:], atol=1e-12)
    assert_allclose(moved.states[:, :4], cca_transfer_states(model, demo.states[:, :6]))


def test_cca_rejects_wrong_widths(rng):
    model = cca_fit(rng.normal(size=(40, 3)), rng.normal(size=(40, 2)))
    with pytest.raises(DimensionError):
        cca_transfer_states(model, np.zeros((2, 4)))
    with pytest.raises(DimensionError):
        cca_fit(np.zeros((1, 3)), np.zeros((1, 3)))


# ---- ablations ----

def test_flag_names():
    assert AblationFlags().name == 'full'
    assert AblationFlags(disable_mi=True).name == 'no-mi'
    assert AblationFlags(disable_inference_adaptation=True, disable_temporal=True).name == 'no-adaptation+no-temporal'
    assert CYCLEGAN_FLAGS.name == 'cyclegan'


def test_flags_zero_the_right_weights():
    hp = AlignHyperparams()
    assert AblationFlags(disable_mi=True).apply(hp).lambda4 == 0.0
    temporal = AblationFlags(disable_temporal=True).apply(hp)
    assert temporal.lambda3 == 0.0 and not temporal.pos_inf_enabled
    assert temporal.lambda5 == hp.lambda5
    cyclegan = CYCLEGAN_FLAGS.apply(hp)
    assert (cyclegan.lambda3, cyclegan.lambda4, cyclegan.lambda5) == (0.0, 0.0, 0.0)
    assert cyclegan.lambda1 == hp.lambda1 and cyclegan.lambda2 == hp.lambda2


def test_ablation_table_has_one_row_per_config_and_seed():
    seen = []

    def run_fn(flags, seed):
        seen.append((flags, seed))
        return 0.1 * seed + (0.5 if flags == AblationFlags() else 0.0)

    rows = run_ablation_table('self', [0, 1], run_fn)
    assert len(rows) == len(ABLATION_CONFIGS) * 2
    assert [row['method'] for row in rows[::2]] == ['full', 'no-adaptation', 'no-mi', 'no-temporal']
    assert all(tuple(row) == RESULT_COLUMNS for row in rows)
    assert rows[1]['normalized_score'] == pytest.approx(0.6)
    assert len(seen) == 8


def test_non_finite_score_is_an_error():
    with pytest.raises(ValueError, match='non-finite'):
        cyclegan_baseline('self', [0], lambda flags, seed: float('nan'))


def test_aggregate_mean_and_std():
    rows = [
        {'scenario': 's', 'method': 'full', 'seed': 0, 'normalized_score': 0.2},
        {'scenario': 's', 'method': 'full', 'seed': 1, 'normalized_score': 0.6},
        {'scenario': 's', 'method': 'cca', 'seed': 0, 'normalized_score': -0.1},
    ]
    summary = aggregate(rows)
    assert list(summary) == ['full', 'cca']
    assert summary['full']['mean'] == pytest.approx(0.4)
    assert summary['full']['std'] == pytest.approx(0.2)
    assert summary['cca']['scores'] == [-0.1]


def test_results_files(tmp_path):
    rows = cyclegan_baseline('d-r2r', [0, 1], lambda flags, seed: 0.25)
    csv_path, json_path = str(tmp_path / 'results.csv'), str(tmp_path / 'summary.json')
    write_results(rows, csv_path, json_path)
    loaded = file_manager.load_csv(csv_path)
    assert [row['method'] for row in loaded] == ['cyclegan', 'cyclegan']
    assert float(loaded[0]['normalized_score']) == 0.25
    assert file_manager.load_json(json_path)['cyclegan']['mean'] == pytest.approx(0.25)


def test_sweep_rows_and_kinds():
    rows = sweep('demos', [2, 8], [0, 1, 2], lambda value, seed: value / 10.0)
    assert len(rows) == 6
    assert {row['value'] for row in rows} == {2, 8}
    with pytest.raises(ValueError, match='unknown sweep kind'):
        sweep('lambdas', [1], [0], lambda value, seed: 0.0)
