#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "una/cli.hpp"
#include "una/dataset.hpp"
#include "una/losses.hpp"
#include "una/oracle.hpp"
#include "una/policy.hpp"
#include "una/reward.hpp"
#include "una/rng.hpp"
#include "una/trainer.hpp"
#include "una/verify.hpp"

namespace py = pybind11;
using namespace una;

namespace {

std::string tokens_repr(const std::vector<uint32_t>& toks) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < toks.size(); ++i) out << (i ? ", " : "") << toks[i];
  out << "]";
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exactly enumerable alignment objectives: policies, implicit rewards, "
            "losses, trainers, and the numeric oracle behind their guarantees.";

  py::register_exception<Error>(m, "Error");

  // --- policy ---------------------------------------------------------------
  py::class_<Vocab>(m, "Vocab")
      .def(py::init([](uint32_t size, uint32_t max_len) {
             Vocab v{size, max_len};
             v.validate();
             return v;
           }),
           py::arg("size"), py::arg("max_len"))
      .def_readonly("size", &Vocab::size)
      .def_readonly("max_len", &Vocab::max_len)
      .def("__repr__", [](const Vocab& v) {
        return "Vocab(size=" + std::to_string(v.size) + ", max_len=" + std::to_string(v.max_len) + ")";
      });

  py::class_<Prompt>(m, "Prompt")
      .def(py::init([](uint32_t id) { return Prompt{id, {}}; }), py::arg("id"))
      .def_readonly("id", &Prompt::id)
      .def("__repr__", [](const Prompt& x) { return "Prompt(" + std::to_string(x.id) + ")"; });
  py::implicitly_convertible<py::int_, Prompt>();

  py::class_<Response>(m, "Response")
      .def(py::init([](std::vector<uint32_t> tokens) { return Response{std::move(tokens)}; }),
           py::arg("tokens"))
      .def_readonly("tokens", &Response::tokens)
      .def("__eq__", [](const Response& a, const Response& b) { return a == b; })
      .def("__repr__", [](const Response& y) { return "Response(" + tokens_repr(y.tokens) + ")"; });
  py::implicitly_convertible<py::list, Response>();

  m.def("response_space_size", &response_space_size, py::arg("vocab"));

  py::class_<ResponseSet, std::shared_ptr<ResponseSet>>(m, "ResponseSet")
      .def_static(
          "enumerate_all",
          [](const Vocab& v) { return std::const_pointer_cast<ResponseSet>(ResponseSet::enumerate_all(v)); },
          py::arg("vocab"))
      .def("__len__", &ResponseSet::size)
      .def("__getitem__",
           [](const ResponseSet& s, size_t i) {
             if (i >= s.size()) throw py::index_error();
             return s.at(i);
           })
      .def("index_of", [](const ResponseSet& s, const Response& y) { return s.index_of(y); })
      .def_property_readonly("vocab", &ResponseSet::vocab);

  py::class_<Policy> policy(m, "Policy");
  py::enum_<Policy::Kind>(policy, "Kind")
      .value("Tabular", Policy::Kind::Tabular)
      .value("Parametric", Policy::Kind::Parametric);
  policy
      .def_static(
          "tabular",
          [](std::vector<uint32_t> ids, std::shared_ptr<ResponseSet> set, std::vector<double> logits,
             bool frozen) {
            return Policy::tabular(std::move(ids), std::move(set), std::move(logits), frozen);
          },
          py::arg("prompt_ids"), py::arg("responses"), py::arg("logits"), py::arg("frozen") = false)
      .def_static(
          "uniform_tabular",
          [](std::vector<uint32_t> ids, std::shared_ptr<ResponseSet> set) {
            return Policy::uniform_tabular(std::move(ids), std::move(set));
          },
          py::arg("prompt_ids"), py::arg("responses"))
      .def_static(
          "random_tabular",
          [](std::vector<uint32_t> ids, std::shared_ptr<ResponseSet> set, uint64_t seed, double scale) {
            return Policy::random_tabular(std::move(ids), std::move(set), seed, scale);
          },
          py::arg("prompt_ids"), py::arg("responses"), py::arg("seed"), py::arg("scale"))
      .def_static("parametric", &Policy::parametric, py::arg("vocab"), py::arg("num_prompts"),
                  py::arg("weights"), py::arg("frozen") = false)
      .def_static("zero_parametric", &Policy::zero_parametric, py::arg("vocab"), py::arg("num_prompts"))
      .def_static("random_parametric", &Policy::random_parametric, py::arg("vocab"),
                  py::arg("num_prompts"), py::arg("seed"), py::arg("scale"))
      .def_static("parametric_param_count", &Policy::parametric_param_count, py::arg("vocab"),
                  py::arg("num_prompts"))
      .def_property_readonly("kind", &Policy::kind)
      .def_property_readonly("vocab", &Policy::vocab)
      .def_property_readonly("frozen", &Policy::frozen)
      .def_property_readonly("params", &Policy::params)
      .def_property_readonly("prompt_ids", &Policy::prompt_ids)
      .def_property_readonly("num_prompts", &Policy::num_prompts)
      .def("log_prob", &Policy::log_prob, py::arg("x"), py::arg("y"))
      .def("sample", &Policy::sample, py::arg("x"), py::arg("rng_seed"))
      .def(
          "apply_gradient",
          [](const Policy& p, const std::vector<double>& grad, double step_size) {
            return p.apply_gradient(grad, step_size);
          },
          py::arg("grad"), py::arg("step_size"))
      .def("frozen_clone", &Policy::frozen_clone)
      .def("defined_on", &Policy::defined_on, py::arg("x"));

  m.def("kl_divergence", &kl_divergence, py::arg("p"), py::arg("q"), py::arg("x"));
  m.def(
      "response_probabilities",
      [](const Policy& pi, const Prompt& x, const ResponseSet& set) {
        return response_probabilities(pi, x, set);
      },
      py::arg("pi"), py::arg("x"), py::arg("responses"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("policy"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  // --- feedback and rewards -------------------------------------------------
  py::enum_<FeedbackKind>(m, "FeedbackKind")
      .value("Pairwise", FeedbackKind::Pairwise)
      .value("Binary", FeedbackKind::Binary)
      .value("Scalar", FeedbackKind::Scalar);

  py::enum_<BinaryLabel>(m, "BinaryLabel")
      .value("Undesired", BinaryLabel::Undesired)
      .value("Desired", BinaryLabel::Desired);

  py::class_<FeedbackRecord>(m, "FeedbackRecord")
      .def_static("pairwise", &FeedbackRecord::pairwise, py::arg("x"), py::arg("chosen"),
                  py::arg("rejected"))
      .def_static("binary", &FeedbackRecord::binary, py::arg("x"), py::arg("response"),
                  py::arg("label"))
      .def_static("scalar", &FeedbackRecord::scalar, py::arg("x"), py::arg("response"),
                  py::arg("raw_score"))
      .def_readonly("kind", &FeedbackRecord::kind)
      .def_readonly("x", &FeedbackRecord::x)
      .def_readonly("chosen", &FeedbackRecord::chosen)
      .def_readonly("rejected", &FeedbackRecord::rejected)
      .def_readonly("response", &FeedbackRecord::response)
      .def_readonly("label", &FeedbackRecord::label)
      .def_readonly("raw_score", &FeedbackRecord::raw_score);

  py::class_<Beta>(m, "Beta")
      .def(py::init<double>(), py::arg("value"))
      .def_readonly("value", &Beta::value)
      .def("__repr__", [](const Beta& b) { return "Beta(" + std::to_string(b.value) + ")"; });
  py::implicitly_convertible<py::float_, Beta>();

  py::class_<ScoreBounds>(m, "ScoreBounds")
      .def(py::init([](double lo, double hi) {
             ScoreBounds b{lo, hi};
             b.validate();
             return b;
           }),
           py::arg("min_raw"), py::arg("max_raw"))
      .def_readonly("min_raw", &ScoreBounds::min_raw)
      .def_readonly("max_raw", &ScoreBounds::max_raw);

  m.def("normalize_score", &normalize_score, py::arg("raw"), py::arg("bounds"));
  m.def("sigmoid", &sigmoid, py::arg("z"));
  m.def("log_sigmoid", &log_sigmoid, py::arg("z"));
  m.def("bt_probability", &bt_probability, py::arg("reward_a"), py::arg("reward_b"));
  m.def("implicit_reward", &implicit_reward, py::arg("pi"), py::arg("ref"), py::arg("beta"),
        py::arg("x"), py::arg("y"));
  m.def("implicit_score", &implicit_score, py::arg("pi"), py::arg("ref"), py::arg("beta"),
        py::arg("x"), py::arg("y"));

  py::class_<ExplicitRewardModel> rm(m, "ExplicitRewardModel");
  py::enum_<ExplicitRewardModel::Kind>(rm, "Kind")
      .value("Table", ExplicitRewardModel::Kind::Table)
      .value("TrainableBt", ExplicitRewardModel::Kind::TrainableBt);
  rm.def_static(
        "table",
        [](const std::vector<std::tuple<uint32_t, std::vector<uint32_t>, double>>& entries) {
          std::vector<ExplicitRewardModel::TableEntry> converted;
          converted.reserve(entries.size());
          for (const auto& [prompt, tokens, reward] : entries) {
            converted.push_back({prompt, Response{tokens}, reward});
          }
          return ExplicitRewardModel::table(std::move(converted));
        },
        py::arg("entries"), "entries: list of (prompt_id, tokens, reward) tuples")
      .def_static("trainable_bt", &ExplicitRewardModel::trainable_bt, py::arg("num_prompts"),
                  py::arg("vocab"))
      .def_static("trainable_bt_with_params", &ExplicitRewardModel::trainable_bt_with_params,
                  py::arg("num_prompts"), py::arg("vocab"), py::arg("weights"))
      .def_static("load_table_json", &ExplicitRewardModel::load_table_json, py::arg("path"))
      .def("save_table_json", &ExplicitRewardModel::save_table_json, py::arg("path"))
      .def_property_readonly("kind", &ExplicitRewardModel::kind)
      .def_property_readonly("params", &ExplicitRewardModel::params)
      .def("reward", &ExplicitRewardModel::reward, py::arg("x"), py::arg("y"))
      .def(
          "apply_gradient",
          [](const ExplicitRewardModel& model, const std::vector<double>& grad, double step) {
            return model.apply_gradient(grad, step);
          },
          py::arg("grad"), py::arg("step_size"));

  py::class_<LossResult>(m, "LossResult")
      .def_readonly("value", &LossResult::value)
      .def_readonly("grad", &LossResult::grad)
      .def_readonly("per_record", &LossResult::per_record);

  m.def("rm_loss",
        [](const ExplicitRewardModel& model, const std::vector<FeedbackRecord>& batch) {
          return rm_loss(model, batch);
        },
        py::arg("rm"), py::arg("batch"));
  m.def("rm_accuracy",
        [](const ExplicitRewardModel& model, const std::vector<FeedbackRecord>& batch) {
          return rm_accuracy(model, batch);
        },
        py::arg("rm"), py::arg("batch"));

  // --- losses ---------------------------------------------------------------
  py::enum_<CompareAs>(m, "CompareAs")
      .value("RewardMse", CompareAs::RewardMse)
      .value("ScoreMse", CompareAs::ScoreMse);

  py::enum_<DifferenceLoss>(m, "DifferenceLoss")
      .value("Mse", DifferenceLoss::Mse)
      .value("Bce", DifferenceLoss::Bce);

  py::class_<SampledResponse>(m, "SampledResponse")
      .def(py::init([](Prompt x, Response y) { return SampledResponse{std::move(x), std::move(y)}; }),
           py::arg("x"), py::arg("y"))
      .def_readonly("x", &SampledResponse::x)
      .def_readonly("y", &SampledResponse::y);

  m.def("loss_una_pair",
        [](const Policy& pi, const Policy& ref, Beta beta, const std::vector<FeedbackRecord>& batch,
           bool shaped) { return loss_una_pair(pi, ref, beta, batch, shaped); },
        py::arg("pi"), py::arg("ref"), py::arg("beta"), py::arg("batch"), py::arg("shaped") = true);
  m.def("loss_dpo",
        [](const Policy& pi, const Policy& ref, Beta beta, const std::vector<FeedbackRecord>& batch) {
          return loss_dpo(pi, ref, beta, batch);
        },
        py::arg("pi"), py::arg("ref"), py::arg("beta"), py::arg("batch"));
  m.def("loss_una_binary",
        [](const Policy& pi, const Policy& ref, Beta beta, const std::vector<FeedbackRecord>& batch,
           DifferenceLoss g) { return loss_una_binary(pi, ref, beta, batch, g); },
        py::arg("pi"), py::arg("ref"), py::arg("beta"), py::arg("batch"),
        py::arg("difference") = DifferenceLoss::Mse);
  m.def("loss_una_score",
        [](const Policy& pi, const Policy& ref, Beta beta, const std::vector<FeedbackRecord>& batch,
           const ScoreBounds& bounds) { return loss_una_score(pi, ref, beta, batch, bounds); },
        py::arg("pi"), py::arg("ref"), py::arg("beta"), py::arg("batch"),
        py::arg("bounds") = ScoreBounds{1.0, 5.0});
  m.def("loss_una_online",
        [](const Policy& pi, const Policy& ref, Beta beta, const ExplicitRewardModel& model,
           const std::vector<SampledResponse>& batch, CompareAs cmp) {
          return loss_una_online(pi, ref, beta, model, batch, cmp);
        },
        py::arg("pi"), py::arg("ref"), py::arg("beta"), py::arg("rm"), py::arg("batch"),
        py::arg("compare_as") = CompareAs::ScoreMse);

  // --- trainer ---------------------------------------------------------------
  py::enum_<LossKind>(m, "LossKind")
      .value("UnaPairShaped", LossKind::UnaPairShaped)
      .value("UnaPairUnshaped", LossKind::UnaPairUnshaped)
      .value("Dpo", LossKind::Dpo)
      .value("UnaBinaryMse", LossKind::UnaBinaryMse)
      .value("UnaBinaryBce", LossKind::UnaBinaryBce)
      .value("UnaScore", LossKind::UnaScore)
      .value("UnaOnlineReward", LossKind::UnaOnlineReward)
      .value("UnaOnlineScore", LossKind::UnaOnlineScore)
      .value("PgBaseline", LossKind::PgBaseline)
      .value("RmBt", LossKind::RmBt);

  py::enum_<PgEstimator>(m, "PgEstimator")
      .value("Sampled", PgEstimator::Sampled)
      .value("Exact", PgEstimator::Exact);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("step_size", &TrainConfig::step_size)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("loss_kind", &TrainConfig::loss_kind)
      .def_readwrite("compare_as", &TrainConfig::compare_as)
      .def_readwrite("grad_norm_cap", &TrainConfig::grad_norm_cap)
      .def_readwrite("eval_every", &TrainConfig::eval_every)
      .def_readwrite("score_bounds", &TrainConfig::score_bounds)
      .def_readwrite("pg_estimator", &TrainConfig::pg_estimator)
      .def_readwrite("track_grad_variance", &TrainConfig::track_grad_variance)
      .def("validate", &TrainConfig::validate);

  py::class_<EvalRecord>(m, "EvalRecord")
      .def_readonly("step", &EvalRecord::step)
      .def_readonly("loss", &EvalRecord::loss)
      .def_readonly("kl", &EvalRecord::kl)
      .def_readonly("mean_r_theta_w", &EvalRecord::mean_r_theta_w)
      .def_readonly("mean_r_theta_l", &EvalRecord::mean_r_theta_l)
      .def_readonly("mean_s_theta_w", &EvalRecord::mean_s_theta_w)
      .def_readonly("mean_s_theta_l", &EvalRecord::mean_s_theta_l)
      .def_readonly("mean_explicit_reward", &EvalRecord::mean_explicit_reward)
      .def_readonly("ms", &EvalRecord::ms)
      .def_readonly("accuracy", &EvalRecord::accuracy)
      .def_readonly("grad_est_sq_dev", &EvalRecord::grad_est_sq_dev);

  py::class_<TrainReport>(m, "TrainReport")
      .def_readonly("evals", &TrainReport::evals)
      .def_readonly("final_policy", &TrainReport::final_policy)
      .def_readonly("total_ms", &TrainReport::total_ms);

  m.def("train_offline",
        [](const Policy& pi0, const Policy& ref, const TrainConfig& cfg,
           const std::vector<FeedbackRecord>& data) { return train_offline(pi0, ref, cfg, data); },
        py::arg("pi0"), py::arg("ref"), py::arg("config"), py::arg("data"));
  m.def("train_online_una",
        [](const Policy& pi0, const Policy& ref, const TrainConfig& cfg,
           const std::vector<Prompt>& prompts, const ExplicitRewardModel& model) {
          return train_online_una(pi0, ref, cfg, prompts, model);
        },
        py::arg("pi0"), py::arg("ref"), py::arg("config"), py::arg("prompts"), py::arg("rm"));
  m.def("train_policy_gradient_baseline",
        [](const Policy& pi0, const Policy& ref, const TrainConfig& cfg,
           const std::vector<Prompt>& prompts, const ExplicitRewardModel& model) {
          return train_policy_gradient_baseline(pi0, ref, cfg, prompts, model);
        },
        py::arg("pi0"), py::arg("ref"), py::arg("config"), py::arg("prompts"), py::arg("rm"));
  m.def("train_reward_model",
        [](const ExplicitRewardModel& rm0, const TrainConfig& cfg,
           const std::vector<FeedbackRecord>& data) { return train_reward_model(rm0, cfg, data); },
        py::arg("rm0"), py::arg("config"), py::arg("data"));
  m.def("write_metrics_csv", &write_metrics_csv, py::arg("report"), py::arg("path"));

  // --- oracle ---------------------------------------------------------------
  py::module_ oracle_mod = m.def_submodule("oracle", "exact closed forms and inequality checks");

  py::class_<oracle::TabularInstance>(oracle_mod, "TabularInstance")
      .def(py::init([](std::vector<Prompt> prompts, std::shared_ptr<ResponseSet> responses, Policy ref,
                       ExplicitRewardModel reward, Beta beta) {
             oracle::TabularInstance inst{std::move(prompts), std::move(responses), std::move(ref),
                                          std::move(reward), beta};
             inst.validate();
             return inst;
           }),
           py::arg("prompts"), py::arg("responses"), py::arg("ref"), py::arg("reward"),
           py::arg("beta"))
      .def_readonly("prompts", &oracle::TabularInstance::prompts)
      .def_property_readonly(
          "responses",
          [](const oracle::TabularInstance& inst) {
            return std::const_pointer_cast<ResponseSet>(inst.responses);
          })
      .def_readonly("ref", &oracle::TabularInstance::ref)
      .def_readonly("reward", &oracle::TabularInstance::reward)
      .def_readonly("beta", &oracle::TabularInstance::beta)
      .def("save", &oracle::TabularInstance::save, py::arg("path"))
      .def_static("load", &oracle::TabularInstance::load, py::arg("path"));

  oracle_mod.def("log_partition", &oracle::log_partition, py::arg("instance"),
                 py::arg("prompt_index"));
  oracle_mod.def("optimal_policy_closed_form", &oracle::optimal_policy_closed_form,
                 py::arg("instance"));
  oracle_mod.def("evaluate_objective", &oracle::evaluate_objective, py::arg("instance"),
                 py::arg("pi"));

  py::class_<oracle::GapReport>(oracle_mod, "GapReport")
      .def_readonly("gaps", &oracle::GapReport::gaps)
      .def_readonly("mean_gap", &oracle::GapReport::mean_gap)
      .def_readonly("max_abs_deviation", &oracle::GapReport::max_abs_deviation)
      .def_readonly("z", &oracle::GapReport::z)
      .def_readonly("log_z", &oracle::GapReport::log_z)
      .def_readonly("lambda_", &oracle::GapReport::lambda)
      .def_readonly("lambda_estimate", &oracle::GapReport::lambda_estimate);

  oracle_mod.def("recovered_reward_gap", &oracle::recovered_reward_gap, py::arg("instance"),
                 py::arg("pi"));

  py::class_<oracle::InequalityCheck>(oracle_mod, "InequalityCheck")
      .def_readonly("holds", &oracle::InequalityCheck::holds)
      .def_readonly("slack", &oracle::InequalityCheck::slack)
      .def_readonly("equality", &oracle::InequalityCheck::equality);

  oracle_mod.def("check_log_sum_inequality",
                 [](const std::vector<double>& a, const std::vector<double>& b) {
                   return oracle::check_log_sum_inequality(a, b);
                 },
                 py::arg("a"), py::arg("b"));
  oracle_mod.def("check_jensen",
                 [](const std::vector<double>& w, const std::vector<double>& p) {
                   return oracle::check_jensen(w, p);
                 },
                 py::arg("weights"), py::arg("points"));
  oracle_mod.def("finite_diff_grad",
                 [](const std::function<double(const std::vector<double>&)>& fn,
                    std::vector<double> params, double eps) {
                   return oracle::finite_diff_grad(fn, std::move(params), eps);
                 },
                 py::arg("fn"), py::arg("params"), py::arg("eps") = 1e-5);
  oracle_mod.def("max_rel_error",
                 [](const std::vector<double>& a, const std::vector<double>& b) {
                   return oracle::max_rel_error(a, b);
                 },
                 py::arg("a"), py::arg("b"));

  // --- dataset ---------------------------------------------------------------
  py::class_<Dataset>(m, "Dataset")
      .def_readonly("records", &Dataset::records)
      .def_readonly("num_pairwise", &Dataset::num_pairwise)
      .def_readonly("num_binary", &Dataset::num_binary)
      .def_readonly("num_scalar", &Dataset::num_scalar)
      .def_readonly("bounds", &Dataset::bounds)
      .def_readonly("content_hash", &Dataset::content_hash);

  m.def("ingest",
        [](const std::string& path, const ScoreBounds& bounds, std::optional<Vocab> vocab) {
          IngestOptions opts;
          opts.bounds = bounds;
          opts.vocab = vocab;
          return ingest(path, opts);
        },
        py::arg("path"), py::arg("bounds") = ScoreBounds{1.0, 5.0},
        py::arg("vocab") = std::nullopt);
  m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("path"));
  m.def("canonical_serialization", &canonical_serialization, py::arg("dataset"));
  m.def("unique_prompts", &unique_prompts, py::arg("dataset"));

  // --- verify ----------------------------------------------------------------
  py::module_ verify_mod = m.def_submodule("verify", "the property suites behind `una_lab verify`");

  py::class_<verify::CheckResult>(verify_mod, "CheckResult")
      .def_readonly("name", &verify::CheckResult::name)
      .def_readonly("pass_", &verify::CheckResult::pass)
      .def_readonly("observed", &verify::CheckResult::observed)
      .def_readonly("bound", &verify::CheckResult::bound)
      .def_readonly("detail", &verify::CheckResult::detail);

  py::class_<verify::SuiteReport>(verify_mod, "SuiteReport")
      .def_readonly("checks", &verify::SuiteReport::checks)
      .def("all_pass", &verify::SuiteReport::all_pass);

  py::enum_<verify::Suite>(verify_mod, "Suite")
      .value("Proofs", verify::Suite::Proofs)
      .value("Gradients", verify::Suite::Gradients)
      .value("Equivalence", verify::Suite::Equivalence)
      .value("Oracle", verify::Suite::Oracle)
      .value("All", verify::Suite::All);

  verify_mod.def("run_suite", &verify::run_suite, py::arg("suite"), py::arg("seed"),
                 py::arg("threads"), py::arg("replay_dir") = ".");
  verify_mod.def("random_instance", &verify::random_instance, py::arg("seed"),
                 py::arg("num_prompts"), py::arg("num_responses"), py::arg("beta"),
                 py::arg("reward_amp"));
  verify_mod.def("two_response_instance", &verify::two_response_instance, py::arg("r0"),
                 py::arg("r1"), py::arg("beta"));
}
