import math

import pytest

import una_lab as ul


def uniform_pair():
    space = ul.ResponseSet.enumerate_all(ul.Vocab(size=5, max_len=1))
    pi = ul.Policy.uniform_tabular([0, 1], space)
    return space, pi, pi.frozen_clone()


def test_uniform_log_prob():
    space, pi, _ = uniform_pair()
    assert pi.log_prob(ul.Prompt(0), space[0]) == pytest.approx(-math.log(5), abs=1e-15)
    probs = ul.response_probabilities(pi, ul.Prompt(1), space)
    assert sum(probs) == pytest.approx(1.0, abs=1e-12)


def test_dpo_equals_shaped_pair():
    space = ul.ResponseSet.enumerate_all(ul.Vocab(size=4, max_len=2))
    pi = ul.Policy.random_tabular([0, 1], space, seed=3, scale=1.0)
    ref = ul.Policy.random_tabular([0, 1], space, seed=4, scale=0.5).frozen_clone()
    batch = [
        ul.FeedbackRecord.pairwise(ul.Prompt(0), space[2], space[7]),
        ul.FeedbackRecord.pairwise(ul.Prompt(1), space[5], space[1]),
    ]
    a = ul.loss_dpo(pi, ref, ul.Beta(0.1), batch)
    b = ul.loss_una_pair(pi, ref, ul.Beta(0.1), batch, shaped=True)
    assert a.value == b.value
    assert a.grad == b.grad


def test_closed_form_tilt():
    inst = ul.verify.two_response_instance(1.0, 0.0, 1.0)
    opt = ul.oracle.optimal_policy_closed_form(inst)
    probs = ul.response_probabilities(opt, inst.prompts[0], inst.responses)
    assert probs[0] == pytest.approx(0.7310585786300049, abs=1e-12)
    gap = ul.oracle.recovered_reward_gap(inst, opt)
    assert max(gap.max_abs_deviation) < 1e-9


def test_offline_training_descends():
    space, pi, ref = uniform_pair()
    data = [
        ul.FeedbackRecord.pairwise(ul.Prompt(0), space[1], space[2]),
        ul.FeedbackRecord.pairwise(ul.Prompt(1), space[3], space[4]),
    ]
    cfg = ul.TrainConfig()
    cfg.loss_kind = ul.LossKind.Dpo
    cfg.beta = ul.Beta(0.1)
    cfg.step_size = 0.5
    cfg.steps = 50
    cfg.eval_every = 10
    report = ul.train_offline(pi, ref, cfg, data)
    assert len(report.evals) == 6
    assert report.evals[0].loss == pytest.approx(math.log(2), abs=1e-12)
    assert report.evals[-1].loss < report.evals[0].loss
    assert report.final_policy is not None


def test_checkpoint_round_trip(tmp_path):
    space, pi, _ = uniform_pair()
    path = str(tmp_path / "policy.ckpt")
    ul.save_checkpoint(pi, path)
    back = ul.load_checkpoint(path)
    assert back.params == pi.params
    assert back.prompt_ids == pi.prompt_ids


def test_ingest_round_trip(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text(
        '{"kind":"pairwise","prompt":0,"chosen":[1,0],"rejected":[2,0]}\n'
        '{"kind":"scalar","prompt":1,"response":[3,0],"raw_score":4.5}\n'
    )
    ds = ul.ingest(str(path))
    assert ds.num_pairwise == 1 and ds.num_scalar == 1
    assert [x.id for x in ul.unique_prompts(ds)] == [0, 1]
    again = tmp_path / "again.jsonl"
    ul.write_dataset(ds, str(again))
    assert ul.ingest(str(again)).content_hash == ds.content_hash


def test_verify_suites_pass(tmp_path):
    report = ul.verify.run_suite(ul.verify.Suite.All, 3, 2, str(tmp_path))
    assert report.all_pass()
    assert all(c.pass_ for c in report.checks)


def test_errors_surface_as_one_type():
    with pytest.raises(ul.Error):
        ul.Beta(-1.0)
    with pytest.raises(ul.Error):
        ul.Vocab(size=1, max_len=1)
    space, pi, ref = uniform_pair()
    with pytest.raises(ul.Error):
        ul.loss_dpo(pi, ref, ul.Beta(0.1), [])
