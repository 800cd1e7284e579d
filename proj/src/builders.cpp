/*
 * Copyright 2026 The Modlearn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "modlearn/instantiate.hpp"
#include "modlearn/npy.hpp"

namespace modlearn {

namespace {

LayerSpec common_layer_fields(Args& a, LayerSpec spec) {
  spec.name = a.get_string("name", "");
  spec.activation = activation_from_string(a.get_string("activation", "linear"));
  if (a.has("max_norm")) spec.max_norm = a.get_double("max_norm");
  if (a.has("init_scale")) spec.init_scale = a.get_double("init_scale");
  return spec;
}

void apply_preprocessors(Args& a, DenseDesignMatrix& ds) {
  auto preprocessors = a.get_preprocessors("preprocessors");
  if (preprocessors.empty()) return;
  const bool fit = a.get_bool("fit", true);
  for (auto& p : preprocessors) p->fit_apply(ds, fit);
}

std::optional<Conv2DSpace> optional_view(Args& a) {
  if (!a.has("view")) return std::nullopt;
  Space s = a.get_space("view");
  if (const auto* c = std::get_if<Conv2DSpace>(&s)) return *c;
  a.error_at("view", DiagCode::kTypeMismatch,
             "the topological view must be a conv2d space");
  return std::nullopt;
}

SchemeKind scheme_arg(Args& a) {
  const std::string s = a.get_string("scheme", "shuffled-sequential");
  try {
    return scheme_from_string(s);
  } catch (const Error&) {
    a.error_at("scheme", DiagCode::kTypeMismatch,
               "unknown iteration scheme '" + s +
                   "' (sequential, shuffled-sequential, random-uniform)");
    return SchemeKind::kShuffledSequential;
  }
}

Registry make_standard_registry() {
  Registry r;

  // -- spaces ---------------------------------------------------------------
  r.add("space.vector", [](Args& a) {
    return std::any(std::make_shared<Space>(VectorSpace{a.get_int("dim")}));
  });
  r.add("space.conv2d", [](Args& a) {
    Conv2DSpace s;
    s.rows = a.get_int("rows");
    s.cols = a.get_int("cols");
    s.channels = a.get_int("channels");
    s.axes = AxisOrder::parse(a.get_string("axes", "bc01"));
    return std::any(std::make_shared<Space>(s));
  });

  // -- layers ---------------------------------------------------------------
  r.add("layer.dense", [](Args& a) {
    LayerSpec spec = common_layer_fields(a, {});
    spec.dim = a.get_int("dim");
    return std::any(std::make_shared<LayerSpec>(spec));
  });
  r.add("layer.conv2d", [](Args& a) {
    LayerSpec spec = common_layer_fields(a, {});
    spec.conv = true;
    spec.out_channels = a.get_int("out_channels");
    if (a.has("kernel")) {
      auto k = a.get_double_list("kernel");
      if (k.size() != 2)
        a.error_at("kernel", DiagCode::kTypeMismatch, "kernel wants [rows, cols]");
      else {
        spec.kernel_rows = static_cast<long long>(k[0]);
        spec.kernel_cols = static_cast<long long>(k[1]);
      }
    } else {
      spec.kernel_rows = a.get_int("kernel_rows");
      spec.kernel_cols = a.get_int("kernel_cols");
    }
    spec.stride = a.get_int("stride", 1);
    spec.pad = a.get_int("pad", 0);
    return std::any(std::make_shared<LayerSpec>(spec));
  });

  // -- models ---------------------------------------------------------------
  r.add("model.mlp", [](Args& a) {
    Space input = a.has("input") ? a.get_space("input")
                                 : Space{VectorSpace{a.get_int("nvis")}};
    std::vector<LayerSpec> specs = a.get_layer_specs("layers");
    Rng rng(a.seed());
    auto m = std::make_shared<MLP>(input, specs, rng);
    return std::any(std::static_pointer_cast<Model>(m));
  });
  r.add("model.dae", [](Args& a) {
    auto m = std::make_shared<DenoisingAutoencoder>(
        a.get_int("nvis"), a.get_int("nhid"), a.get_double("corruption", 0.3),
        Rng(a.seed()));
    return std::any(std::static_pointer_cast<Model>(m));
  });
  r.add("model.rbm", [](Args& a) {
    auto m = std::make_shared<RBM>(a.get_int("nvis"), a.get_int("nhid"),
                                   Rng(a.seed()),
                                   a.get_double("cd_learning_rate", 0.1));
    return std::any(std::static_pointer_cast<Model>(m));
  });

  // -- datasets ---------------------------------------------------------------
  r.add("data.inline", [](Args& a) {
    Tensor x = a.get_tensor("X");
    std::optional<Tensor> y;
    if (a.has("y")) y = a.get_tensor("y");
    auto ds = std::make_shared<DenseDesignMatrix>(std::move(x), std::move(y),
                                                  optional_view(a),
                                                  a.get_string("name", "inline"));
    apply_preprocessors(a, *ds);
    return std::any(ds);
  });
  r.add("data.csv", [](Args& a) {
    const std::string path = a.resolve_path(a.get_string("path"));
    std::optional<long long> label_column;
    if (a.has("label_column")) label_column = a.get_int("label_column");
    auto ds = std::make_shared<DenseDesignMatrix>(load_csv(path, label_column));
    if (auto view = optional_view(a))
      *ds = DenseDesignMatrix(ds->design_matrix(),
                              ds->targets() ? std::optional<Tensor>(*ds->targets())
                                            : std::nullopt,
                              view, a.get_string("name", path));
    apply_preprocessors(a, *ds);
    return std::any(ds);
  });
  r.add("data.npy", [](Args& a) {
    Tensor x = load_npy(a.resolve_path(a.get_string("x")));
    std::optional<Tensor> y;
    if (a.has("y")) y = load_npy(a.resolve_path(a.get_string("y")));
    auto view = optional_view(a);
    if (x.rank() == 4 && view) {
      Batch rows = format_as(Batch{x, Space{*view}}, VectorSpace{num_elements(Space{*view})});
      x = rows.tensor;
    }
    auto ds = std::make_shared<DenseDesignMatrix>(std::move(x), std::move(y), view,
                                                  a.get_string("name", "npy"));
    apply_preprocessors(a, *ds);
    return std::any(ds);
  });
  r.add("data.gaussian_blobs", [](Args& a) {
    const long long per_class = a.get_int("n");
    Tensor centers = a.get_tensor("centers");
    const double stddev = a.get_double("stddev", 1.0);
    if (centers.rank() != 2 || centers.extent(0) < 1)
      throw ValueError("centers must be a [classes, dim] matrix");
    const long long classes = centers.extent(0);
    const long long dim = centers.extent(1);
    Rng rng(a.seed());
    Tensor x(Shape{per_class * classes, dim});
    std::vector<long long> labels;
    labels.reserve(static_cast<std::size_t>(per_class * classes));
    std::size_t row = 0;
    for (long long c = 0; c < classes; ++c)
      for (long long i = 0; i < per_class; ++i, ++row) {
        for (long long j = 0; j < dim; ++j)
          x.at(row, static_cast<std::size_t>(j)) =
              rng.normal(centers.at(static_cast<std::size_t>(c),
                                    static_cast<std::size_t>(j)),
                         stddev);
        labels.push_back(c);
      }
    auto ds = std::make_shared<DenseDesignMatrix>(std::move(x), one_hot(labels),
                                                  std::nullopt,
                                                  a.get_string("name", "gaussians"));
    apply_preprocessors(a, *ds);
    return std::any(ds);
  });
  r.add("data.random_binary", [](Args& a) {
    const long long n = a.get_int("n");
    const long long dim = a.get_int("dim");
    const double p = a.get_double("p", 0.5);
    Rng rng(a.seed());
    Tensor x(Shape{n, dim});
    for (double& v : x.data()) v = rng.bernoulli(p) ? 1.0 : 0.0;
    auto ds = std::make_shared<DenseDesignMatrix>(std::move(x), std::nullopt,
                                                  std::nullopt,
                                                  a.get_string("name", "binary"));
    apply_preprocessors(a, *ds);
    return std::any(ds);
  });

  // -- preprocessors ----------------------------------------------------------
  r.add("preproc.standardize", [](Args& a) {
    auto p = std::make_shared<Standardize>(a.get_double("eps", 1e-8));
    return std::any(std::static_pointer_cast<Preprocessor>(p));
  });
  r.add("preproc.gcn", [](Args& a) {
    auto p = std::make_shared<GlobalContrastNormalize>(a.get_double("scale", 1.0),
                                                       a.get_double("eps", 1e-8));
    return std::any(std::static_pointer_cast<Preprocessor>(p));
  });
  r.add("preproc.pca", [](Args& a) {
    auto p = std::make_shared<PCA>(a.get_int("num_components"));
    return std::any(std::static_pointer_cast<Preprocessor>(p));
  });
  r.add("preproc.zca", [](Args& a) {
    auto p = std::make_shared<ZCA>(a.get_double("eps", 1e-8));
    return std::any(std::static_pointer_cast<Preprocessor>(p));
  });

  // -- costs ------------------------------------------------------------------
  r.add("cost.nll", [](Args&) {
    return std::any(std::static_pointer_cast<Cost>(std::make_shared<NLLSoftmax>()));
  });
  r.add("cost.mse", [](Args&) {
    return std::any(std::static_pointer_cast<Cost>(std::make_shared<GaussianMSE>()));
  });
  r.add("cost.weight_decay", [](Args& a) {
    std::vector<double> coeffs;
    if (a.has("coeffs"))
      coeffs = a.get_double_list("coeffs");
    else
      coeffs.push_back(a.get_double("coeff"));
    auto c = std::make_shared<WeightDecay>(std::move(coeffs));
    return std::any(std::static_pointer_cast<Cost>(c));
  });
  r.add("cost.dropout", [](Args& a) {
    auto base = a.get_mlp_cost("base");
    std::vector<double> probs, scales;
    if (a.has("include_probs")) probs = a.get_double_list("include_probs");
    if (a.has("scales")) scales = a.get_double_list("scales");
    const double default_prob = a.get_double("include_prob", 0.5);
    const double default_scale = a.get_double("scale", -1.0);
    if (!base) throw ValueError("dropout needs a base cost");
    auto c = std::make_shared<DropoutCost>(base, default_prob, std::move(probs),
                                           default_scale, std::move(scales), a.seed());
    return std::any(std::static_pointer_cast<Cost>(c));
  });
  r.add("cost.sum", [](Args& a) {
    auto c = std::make_shared<SumOfCosts>(a.get_cost_terms("terms"));
    return std::any(std::static_pointer_cast<Cost>(c));
  });
  r.add("cost.cd", [](Args& a) {
    auto c = std::make_shared<ContrastiveDivergence>(a.get_int("k", 1), a.seed());
    return std::any(std::static_pointer_cast<Cost>(c));
  });
  r.add("cost.pcd", [](Args& a) {
    auto c = std::make_shared<PersistentCD>(a.get_int("num_chains"),
                                            a.get_int("k", 1), a.seed());
    return std::any(std::static_pointer_cast<Cost>(c));
  });

  // -- learning rules -----------------------------------------------------------
  r.add("rule.momentum", [](Args& a) {
    return std::any(
        std::make_shared<LearningRule>(LearningRule::with_momentum(a.get_double("mu"))));
  });
  r.add("rule.polyak", [](Args& a) {
    return std::any(std::make_shared<LearningRule>(LearningRule::polyak(
        a.get_int("start_epoch", 0), a.get_bool("use_averaged", true))));
  });

  // -- termination ----------------------------------------------------------
  r.add("term.epochs", [](Args& a) {
    auto t = std::make_shared<EpochCounter>(a.get_int("max"));
    return std::any(std::static_pointer_cast<TerminationCriterion>(t));
  });
  r.add("term.monitor_based", [](Args& a) {
    auto t = std::make_shared<MonitorBased>(a.get_string("channel"),
                                            a.get_int("patience", 1),
                                            a.get_double("prop_decrease", 0.0));
    return std::any(std::static_pointer_cast<TerminationCriterion>(t));
  });
  auto composite = [](Args& a, bool is_and) -> std::any {
    std::any raw = a.raw("of");
    auto* list = std::any_cast<AnyList>(&raw);
    std::vector<std::shared_ptr<TerminationCriterion>> children;
    if (!list) {
      a.error(DiagCode::kTypeMismatch, "'of' must be a list of criteria");
    } else {
      for (const std::any& item : *list) {
        if (!item.has_value() || item.type() == typeid(std::monostate)) continue;
        if (auto* p = std::any_cast<std::shared_ptr<TerminationCriterion>>(&item))
          children.push_back(*p);
        else
          a.error(DiagCode::kTypeMismatch, "'of' entries must be criteria");
      }
    }
    if (is_and) {
      auto t = std::make_shared<AndCriterion>(std::move(children));
      return std::any(std::static_pointer_cast<TerminationCriterion>(t));
    }
    auto t = std::make_shared<OrCriterion>(std::move(children));
    return std::any(std::static_pointer_cast<TerminationCriterion>(t));
  };
  r.add("term.and", [composite](Args& a) { return composite(a, true); });
  r.add("term.or", [composite](Args& a) { return composite(a, false); });

  // -- algorithms -----------------------------------------------------------
  r.add("alg.sgd", [](Args& a) {
    LearningRule rule = LearningRule::none();
    if (auto rp = a.get_rule("rule")) rule = *rp;
    auto alg = std::make_shared<SGD>(
        a.get_cost("cost"), a.get_double("learning_rate"), a.get_int("batch_size"),
        scheme_arg(a), a.get_criterion("termination"), a.seed(), rule,
        a.get_int("num_batches", 0));
    return std::any(std::static_pointer_cast<TrainingAlgorithm>(alg));
  });
  r.add("alg.bgd", [](Args& a) {
    const std::string mode_s = a.get_string("mode", "steepest");
    BGD::Mode mode = BGD::Mode::kSteepestDescent;
    if (mode_s == "cg" || mode_s == "conjugate")
      mode = BGD::Mode::kConjugateGradient;
    else if (mode_s != "steepest")
      a.error_at("mode", DiagCode::kTypeMismatch,
                 "mode must be 'steepest' or 'cg', got '" + mode_s + "'");
    const std::string ls_s = a.get_string("line_search", "backtracking");
    BGD::LineSearchKind ls = BGD::LineSearchKind::kBacktracking;
    if (ls_s == "bracketing")
      ls = BGD::LineSearchKind::kBracketing;
    else if (ls_s != "backtracking")
      a.error_at("line_search", DiagCode::kTypeMismatch,
                 "line_search must be 'backtracking' or 'bracketing'");
    auto alg = std::make_shared<BGD>(a.get_cost("cost"), a.get_int("batch_size"),
                                     a.get_int("accumulate", 1),
                                     a.get_int("updates_per_batch", 1), mode, ls,
                                     a.get_criterion("termination"), a.seed());
    return std::any(std::static_pointer_cast<TrainingAlgorithm>(alg));
  });
  r.add("alg.default", [](Args& a) {
    auto alg = std::make_shared<DefaultTrainingAlgorithm>(a.get_int("batch_size"),
                                                          a.get_criterion("termination"));
    return std::any(std::static_pointer_cast<TrainingAlgorithm>(alg));
  });

  // -- harness ----------------------------------------------------------------
  r.add("train.harness", [](Args& a) {
    TrainHarness::Options opts;
    opts.save_path = a.get_string("save_path", "");
    opts.save_freq = a.get_int("save_freq", 0);
    opts.monitor_batch_size = a.get_int("monitor_batch_size", 128);
    auto harness = std::make_shared<TrainHarness>(
        a.get_dataset("dataset"), a.get_model("model"), a.get_algorithm("algorithm"),
        a.get_dataset_map("monitoring"), opts, a.ctx().global_seed);
    return std::any(harness);
  });

  return r;
}

}  // namespace

const Registry& Registry::standard() {
  static const Registry registry = make_standard_registry();
  return registry;
}

}  // namespace modlearn
