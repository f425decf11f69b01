// Acceptance harness: one PASS/FAIL line per criterion, tolerances pinned below.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hdsrnn/baselines.hpp"
#include "hdsrnn/eval.hpp"
#include "hdsrnn/grad_check.hpp"
#include "hdsrnn/synthdata.hpp"

using namespace hdsrnn;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using nn::SpatialVariant;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradStep = 1e-5;
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kConvexTolerance = 1e-12;
constexpr int kConvexPasses = 1000;
constexpr double kDegeneracyTolerance = 1e-12;
constexpr int kDegeneracyInstances = 100;
constexpr double kRoundTripTolerance = 1e-9;
constexpr int kRoundTripPanels = 10;
constexpr double kOverfitTarget = 1e-3;
constexpr std::size_t kOverfitEpochs = 2000;
constexpr double kOverfitSeconds = 300.0;
constexpr double kLongLagSeconds = 1800.0;
constexpr double kMetricTolerance = 1e-14;
constexpr double kRmseTolerance = 1e-12;
constexpr int kMetricPairs = 1000;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(shape);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : t.values()) v = u(rng);
  return t;
}

nn::ModelConfig small_config(SpatialVariant v, std::size_t n, std::size_t horizon, std::size_t tau, std::size_t m) {
  nn::ModelConfig c;
  c.sensors = n;
  c.encoder_length = horizon;
  c.decoder_length = tau;
  c.hidden_dim = m;
  c.spatial_variant = v;
  c.temporal_attention = v != SpatialVariant::None;
  c.dropout = 0.0;
  return c;
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::size_t n = 3, horizon = 5, tau = 2, m = 4;
  std::mt19937_64 rng(101);
  const ad::GradCheckOptions opts{kGradStep, kGradTolerance};
  double worst = 0.0;
  std::string worst_name;
  std::size_t checks = 0;
  const auto record = [&](const std::string& name, const ad::GradCheckReport& r) {
    ++checks;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = name;
    }
  };

  {  // LSTM cell, over its weights, input and both states.
    nn::ParameterSet params;
    Rng init(1);
    const nn::LstmCell cell = nn::LstmCell::create(params, "cell", n, m, init);
    std::vector<Tensor> values = params.values();
    for (std::size_t len : {n, m, m}) values.push_back(random_tensor(Shape{len}, rng));
    const Tensor target = random_tensor(Shape{2 * m}, rng);
    record("lstm_cell", ad::grad_check(
                            [&](Tape& tape, std::span<const Var> p) {
                              const nn::LstmState st = nn::lstm_step(cell, p.first(2), p[2], p[3], p[4]);
                              return ad::mse_loss(ad::concat(st.h, st.s), tape.constant(target));
                            },
                            values, {}, opts));
  }
  {  // Two-layer stack unrolled over T steps.
    nn::ParameterSet params;
    Rng init(2);
    const nn::LstmStack stack = nn::LstmStack::create(params, "stack", n, m, 2, init);
    std::vector<Tensor> values = params.values();
    const Tensor x = random_tensor(Shape{n, horizon}, rng);
    record("lstm_stack", ad::grad_check(
                             [&](Tape& tape, std::span<const Var> p) {
                               auto state = stack.zero_state(tape);
                               Var out;
                               for (std::size_t t = 0; t < horizon; ++t) {
                                 std::vector<double> col(n);
                                 for (std::size_t k = 0; k < n; ++k) col[k] = x.at(k, t);
                                 out = stack.step(p, tape.constant(Tensor::vector(col)), state).h;
                               }
                               return ad::sum(ad::tanh(out));
                             },
                             values, {}, opts));
  }
  {  // Affine and dropout (fixed mask: the RNG is reseeded per evaluation).
    nn::ParameterSet params;
    Rng init(3);
    const nn::AffineLayer layer = nn::AffineLayer::create(params, "affine", 2 * m, n, init);
    std::vector<Tensor> values = params.values();
    values.push_back(random_tensor(Shape{2 * m}, rng));
    record("affine+dropout", ad::grad_check(
                                 [&](Tape&, std::span<const Var> p) {
                                   Rng mask(4);
                                   const Var d = nn::dropout({0.3, true}, p[2], mask);
                                   const Var y = nn::affine(layer, p.first(2), d);
                                   return ad::sum(y * y);
                                 },
                                 values, {}, opts));
  }
  for (auto v : {SpatialVariant::TemporalInput, SpatialVariant::SpatialInput, SpatialVariant::Hybrid}) {
    nn::ParameterSet params;
    Rng init(5);
    const nn::SpatialAttention attn = nn::SpatialAttention::create(params, "sa", v, n, horizon, m, 0, init);
    std::vector<Tensor> values = params.values();
    values.push_back(random_tensor(Shape{m}, rng));
    values.push_back(random_tensor(Shape{m}, rng));
    const std::size_t np = params.size();
    const Tensor x = random_tensor(Shape{n, horizon}, rng);
    const Tensor probe = random_tensor(Shape{n}, rng);
    record("spatial_attention/" + nn::to_string(v),
           ad::grad_check(
               [&](Tape& tape, std::span<const Var> p) {
                 const Var a = nn::spatial_weights(nn::spatial_scores(attn, p.first(np), x, 3, p[np], p[np + 1]));
                 const Var out = nn::apply_spatial(a, tape.constant(probe));
                 return ad::sum(ad::tanh(out * out + a));
               },
               values, {}, opts));
  }
  {
    nn::ParameterSet params;
    Rng init(6);
    const nn::TemporalAttention attn = nn::TemporalAttention::create(params, "ta", m, init);
    std::vector<Tensor> values = params.values();
    values.push_back(random_tensor(Shape{m, horizon}, rng));
    values.push_back(random_tensor(Shape{m}, rng));
    values.push_back(random_tensor(Shape{m}, rng));
    const std::size_t np = params.size();
    record("temporal_attention", ad::grad_check(
                                     [&](Tape&, std::span<const Var> p) {
                                       const Var beta = ad::softmax(
                                           nn::temporal_scores(attn, p.first(np), p[np], p[np + 1], p[np + 2]));
                                       return ad::sum(ad::tanh(nn::temporal_context(beta, p[np])));
                                     },
                                     values, {}, opts));
  }
  for (auto v : {SpatialVariant::TemporalInput, SpatialVariant::SpatialInput, SpatialVariant::Hybrid,
                 SpatialVariant::None}) {
    const nn::Model model(small_config(v, n, horizon, tau, m), 7);
    const Tensor x = random_tensor(Shape{n, horizon}, rng);
    const Tensor truth = random_tensor(Shape{tau}, rng);
    std::vector<Tensor> values = model.parameters().values();
    record("model/" + nn::to_string(v), ad::grad_check(
                                            [&](Tape& tape, std::span<const Var> p) {
                                              nn::RunContext ctx;
                                              const auto g = model.build(tape, p, x, 0.2, ctx);
                                              return ad::mse_loss(g.values, tape.constant(truth));
                                            },
                                            values, model.parameters().names(), opts));
  }
  const double elapsed = seconds_since(t0);
  return {worst < kGradTolerance && elapsed < kGradSeconds,
          fmt("%zu checks, max rel err %.2e (%s) < %.0e; %.1f s < %.0f s", checks, worst, worst_name.c_str(),
              kGradTolerance, elapsed, kGradSeconds)};
}

// ---------------------------------------------------------------------------

Outcome convexity() {
  std::mt19937_64 rng(202);
  const SpatialVariant variants[] = {SpatialVariant::TemporalInput, SpatialVariant::SpatialInput,
                                     SpatialVariant::Hybrid};
  double worst_sum = 0.0, most_negative = 0.0;
  std::size_t vectors = 0;
  for (int pass = 0; pass < kConvexPasses; ++pass) {
    const auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
    nn::ModelConfig c = small_config(variants[pass % 3], pick(1, 6), pick(1, 8), pick(1, 4), pick(1, 6));
    c.layer_count = pick(1, 2);
    nn::Model model(c, rng());
    // Scale parameters and inputs up to drive the softmax towards saturation.
    const double scale = std::uniform_real_distribution<double>(0.1, 5.0)(rng);
    for (Tensor& t : model.parameters().values())
      for (double& v : t.values()) v *= scale;
    const Tensor x = random_tensor(Shape{c.sensors, c.encoder_length}, rng, 10.0);
    const nn::Forecast f = model.forward(x, std::uniform_real_distribution<double>(-3, 3)(rng));
    for (const Tensor* trace : {&f.spatial_trace, &f.temporal_trace}) {
      for (std::size_t r = 0; r < trace->rows(); ++r) {
        double total = 0.0;
        for (std::size_t k = 0; k < trace->cols(); ++k) {
          most_negative = std::min(most_negative, trace->at(r, k));
          total += trace->at(r, k);
        }
        worst_sum = std::max(worst_sum, std::abs(total - 1.0));
        ++vectors;
      }
    }
  }
  return {most_negative >= 0.0 && worst_sum <= kConvexTolerance,
          fmt("%d passes, %zu weight vectors, min weight %.3g >= 0, max |sum-1| %.2e <= %.0e", kConvexPasses, vectors,
              most_negative, worst_sum, kConvexTolerance)};
}

// ---------------------------------------------------------------------------

void copy_parameters(const nn::Model& from, nn::Model& to, const std::string& rename_from = "",
                     const std::string& rename_to = "") {
  auto& dst = to.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::string name = dst.name(i);
    if (!rename_to.empty() && name == rename_to) name = rename_from;
    dst.value(i) = from.parameters().value(from.parameters().index_of(name));
  }
}

void zero_parameter(nn::Model& model, const std::string& name) {
  for (double& v : model.parameters().value(model.parameters().index_of(name)).values()) v = 0.0;
}

Outcome variant_degeneracy() {
  std::mt19937_64 rng(303);
  double worst_temporal = 0.0, worst_spatial = 0.0;
  for (int i = 0; i < kDegeneracyInstances; ++i) {
    const auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
    nn::ModelConfig c = small_config(SpatialVariant::Hybrid, pick(1, 6), pick(1, 8), pick(1, 4), pick(1, 6));
    c.layer_count = pick(1, 2);
    c.attention_width = pick(1, 6);
    const std::uint64_t seed = rng();
    const Tensor x = random_tensor(Shape{c.sensors, c.encoder_length}, rng, 2.0);
    const double y_last = std::uniform_real_distribution<double>(-1, 1)(rng);

    nn::Model hybrid(c, seed);
    zero_parameter(hybrid, "encoder.spatial.u_prime");
    nn::ModelConfig tc = c;
    tc.spatial_variant = SpatialVariant::TemporalInput;
    nn::Model temporal(tc, seed + 1);
    copy_parameters(hybrid, temporal);
    const auto a = hybrid.forward(x, y_last).values, b = temporal.forward(x, y_last).values;
    for (std::size_t j = 0; j < a.size(); ++j) worst_temporal = std::max(worst_temporal, std::abs(a[j] - b[j]));

    nn::Model hybrid2(c, seed);
    zero_parameter(hybrid2, "encoder.spatial.u");
    nn::ModelConfig sc = c;
    sc.spatial_variant = SpatialVariant::SpatialInput;
    nn::Model spatial(sc, seed + 2);
    // SpatialInput's U_e acts on x_t, the role U'_e plays in Hybrid.
    copy_parameters(hybrid2, spatial, "encoder.spatial.u_prime", "encoder.spatial.u");
    const auto d = hybrid2.forward(x, y_last).values, e = spatial.forward(x, y_last).values;
    for (std::size_t j = 0; j < d.size(); ++j) worst_spatial = std::max(worst_spatial, std::abs(d[j] - e[j]));
  }
  return {worst_temporal <= kDegeneracyTolerance && worst_spatial <= kDegeneracyTolerance,
          fmt("%d instances; U'=0 vs temporal_input max diff %.2e, U=0 vs spatial_input max diff %.2e (<= %.0e)",
              kDegeneracyInstances, worst_temporal, worst_spatial, kDegeneracyTolerance)};
}

// ---------------------------------------------------------------------------

Outcome pretreatment_round_trip() {
  std::mt19937_64 rng(404);
  double worst[3] = {0, 0, 0};
  bool isolated = true;
  for (int i = 0; i < kRoundTripPanels; ++i) {
    synth::GeneratorConfig g;
    g.length = 48 * (8 + rng() % 10);
    g.seed = rng();
    g.noise_scale = std::uniform_real_distribution<double>(0.2, 3.0)(rng);
    const synth::NetworkSpec spec = i % 2 ? synth::default_wds_spec() : synth::planted_lag_spec(5 + rng() % 30);
    const data::SeriesPanel raw = synth::generate_panel(spec, g);
    const data::Pretreated p = data::pretreat(raw);
    const data::SeriesPanel back = data::invert(p.normalized, p.model, p.initial);
    for (std::size_t k = 0; k < raw.sensor_count(); ++k)
      for (std::size_t t = 0; t < raw.length(); ++t) {
        const int split = t < raw.split.train_end ? 0 : t < raw.split.val_end ? 1 : 2;
        worst[split] = std::max(worst[split], std::abs(back.at(k, t) - raw.at(k, t)));
      }

    // Perturb only validation and test values; every fitted statistic must stay bitwise equal.
    data::SeriesPanel perturbed = raw;
    std::normal_distribution<double> noise(0.0, 10.0);
    for (std::size_t k = 0; k < raw.sensor_count(); ++k)
      for (std::size_t t = raw.split.train_end; t < raw.length(); ++t) perturbed.values.at(k, t) += noise(rng);
    const data::Pretreated q = data::pretreat(perturbed);
    isolated = isolated && q.model.profile == p.model.profile && q.model.mean == p.model.mean &&
               q.model.scale == p.model.scale && q.initial == p.initial;
  }
  const double all = std::max({worst[0], worst[1], worst[2]});
  return {all <= kRoundTripTolerance && isolated,
          fmt("%d panels; max |inverse - raw| train %.2e, val %.2e, test %.2e (<= %.0e); statistics %s under "
              "val/test perturbation",
              kRoundTripPanels, worst[0], worst[1], worst[2], kRoundTripTolerance,
              isolated ? "bitwise unchanged" : "CHANGED")};
}

// ---------------------------------------------------------------------------

Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::size_t n = 2, horizon = 10, tau = 2, windows_wanted = 200;
  const std::size_t length = windows_wanted + horizon + tau - 1;
  data::SeriesPanel panel;
  panel.sensors = {{"F1", data::SensorKind::Flow}, {"F2", data::SensorKind::Flow}};
  panel.values = Tensor(Shape{n, length});
  for (std::size_t t = 0; t < length; ++t) {
    panel.timestamps.push_back(1577836800 + static_cast<std::int64_t>(t) * data::kCadenceSeconds);
    const double s = static_cast<double>(t);
    panel.values.at(0, t) = std::sin(2.0 * M_PI * s / 24.0);
    panel.values.at(1, t) = 0.5 * std::cos(2.0 * M_PI * s / 17.0);
  }
  panel.split = {length, length};
  const auto windows = data::windowize(panel, horizon, tau, 0, data::Split::Train);

  nn::ModelConfig c = small_config(SpatialVariant::Hybrid, n, horizon, tau, 16);
  train::ModelForecaster model(nn::Model(c, 11));
  train::AdamOptions opts;
  opts.learning_rate = 1e-3;
  train::AdamState adam = train::AdamState::for_parameters(model.parameters().values(), opts);
  Rng rng(12);
  double mse = train::evaluate(model, windows).mse;
  std::size_t epoch = 0;
  while (mse >= kOverfitTarget && epoch < kOverfitEpochs) {
    train::train_epoch(model, adam, windows, 20, rng);
    ++epoch;
    mse = train::evaluate(model, windows).mse;
  }
  const double elapsed = seconds_since(t0);
  return {mse < kOverfitTarget && elapsed < kOverfitSeconds,
          fmt("%zu windows, m=16: train MSE %.2e after %zu epochs (< %.0e within %zu); %.1f s < %.0f s",
              windows.size(), mse, epoch, kOverfitTarget, kOverfitEpochs, elapsed, kOverfitSeconds)};
}

// ---------------------------------------------------------------------------

Outcome attention_interpretability() {
  synth::GeneratorConfig g;
  g.length = 48 * 42;
  const synth::NetworkSpec spec = synth::default_wds_spec();
  const std::size_t coupled = spec.index_of("F4"), noise = spec.index_of("F11");
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    g.seed = seed;
    const data::Pretreated data = data::pretreat(synth::generate_panel(spec, g));
    nn::ModelConfig c = small_config(SpatialVariant::Hybrid, 18, 20, 1, 16);
    c.target_sensor = data.raw.sensor_index("F8");
    c.dropout = 0.2;
    train::TrainConfig tc;
    tc.max_epochs = 40;
    tc.patience = 10;
    tc.seed = seed;
    const train::FitResult fit = train::fit(c, tc, data);
    const eval::AttentionSummary s = eval::export_spatial_weights(fit.model, fit.report, data, &spec);
    const bool win = s.mean_weight[coupled] > s.mean_weight[noise];
    wins += win;
    detail += fmt("%sseed %llu: F4 %.4f vs F11 %.4f (best epoch %zu)", detail.empty() ? "" : "; ",
                  static_cast<unsigned long long>(seed), s.mean_weight[coupled], s.mean_weight[noise],
                  fit.report.best_epoch);
  }
  return {wins >= 2, fmt("hybrid, target F8, uniform would be %.4f: %s; %d/3 seeds (need >= 2)", 1.0 / 18.0,
                         detail.c_str(), wins)};
}

// ---------------------------------------------------------------------------

Outcome long_lag() {
  const auto t0 = std::chrono::steady_clock::now();
  const synth::NetworkSpec spec = synth::planted_lag_spec(40);
  const std::vector<std::size_t> sweep_values = {5, 10, 20, 40, 60};
  const std::vector<std::size_t> seq2seq_values = {5, 10, 20};
  std::vector<std::vector<double>> sweep_mse(sweep_values.size()), seq2seq_mse(seq2seq_values.size());
  std::size_t train_windows = 0;

  train::TrainConfig tc;
  tc.max_epochs = 80;
  tc.patience = 15;
  tc.batch_size = 32;
  for (std::uint64_t seed : kSeeds) {
    synth::GeneratorConfig g;
    g.length = 48 * 54;
    g.seed = seed;
    const data::Pretreated data = data::pretreat(synth::generate_panel(spec, g));
    train_windows = data::window_count(data.normalized, 60, 1, data::Split::Train);
    tc.seed = seed;

    nn::ModelConfig c = small_config(SpatialVariant::Hybrid, 3, 60, 1, 16);
    const eval::SweepResult sweep = eval::sweep_encoder_length(c, tc, sweep_values, data);
    for (std::size_t i = 0; i < sweep_values.size(); ++i)
      sweep_mse[i].push_back(sweep.points[i].converged ? sweep.points[i].evaluation->residual.mse : INFINITY);

    baselines::BaselineSpec b;
    b.kind = baselines::BaselineKind::Seq2Seq;
    b.seq2seq = small_config(SpatialVariant::None, 3, 5, 1, 16);
    b.training = tc;
    for (std::size_t i = 0; i < seq2seq_values.size(); ++i)
      seq2seq_mse[i].push_back(baselines::run_baseline(b, data, seq2seq_values[i], 1, 0).residual.mse);
  }
  std::vector<double> sweep_median, seq2seq_median;
  for (const auto& v : sweep_mse) sweep_median.push_back(median(v));
  for (const auto& v : seq2seq_mse) seq2seq_median.push_back(median(v));
  const double model_t60 = sweep_median.back();
  const double best_seq2seq = *std::min_element(seq2seq_median.begin(), seq2seq_median.end());
  const double at_t5 = sweep_median.front();
  bool long_beats_short = true;
  for (std::size_t i = 0; i < sweep_values.size(); ++i)
    if (sweep_values[i] >= 40) long_beats_short = long_beats_short && sweep_median[i] < at_t5;
  const double elapsed = seconds_since(t0);

  std::string curve;
  for (std::size_t i = 0; i < sweep_values.size(); ++i)
    curve += fmt("%sT=%zu %.4f", curve.empty() ? "" : ", ", sweep_values[i], sweep_median[i]);
  std::string s2s;
  for (std::size_t i = 0; i < seq2seq_values.size(); ++i)
    s2s += fmt("%sT=%zu %.4f", s2s.empty() ? "" : ", ", seq2seq_values[i], seq2seq_median[i]);
  return {model_t60 < best_seq2seq && long_beats_short && elapsed < kLongLagSeconds,
          fmt("lag 40, %zu train windows, median of 3 seeds; hDS-RNN sweep [%s]; Seq2Seq [%s]; T=60 %.4f vs best "
              "Seq2Seq %.4f; T>=40 below T=5: %s; %.0f s < %.0f s",
              train_windows, curve.c_str(), s2s.c_str(), model_t60, best_seq2seq, long_beats_short ? "yes" : "no",
              elapsed, kLongLagSeconds)};
}

// ---------------------------------------------------------------------------

Outcome error_accumulation() {
  constexpr std::size_t tau = 10;
  std::vector<std::vector<double>> recon(tau), resid(tau);
  for (std::uint64_t seed : kSeeds) {
    synth::GeneratorConfig g;
    g.length = 48 * 30;
    g.seed = seed;
    const data::Pretreated data = data::pretreat(synth::generate_panel(synth::planted_lag_spec(40), g));
    nn::ModelConfig c = small_config(SpatialVariant::Hybrid, 3, 20, tau, 16);
    train::TrainConfig tc;
    tc.max_epochs = 15;
    tc.patience = 5;
    tc.seed = seed;
    const train::FitResult fit = train::fit(c, tc, data);
    const eval::Evaluation e = eval::evaluate_test(fit.model, data);
    for (std::size_t j = 0; j < tau; ++j) {
      recon[j].push_back(e.reconstructed_per_step[j].mse);
      resid[j].push_back(e.residual_per_step[j].mse);
    }
  }
  std::string rc, rs;
  bool monotone = true, resid_monotone = true;
  double prev = -1.0, prev_r = -1.0;
  for (std::size_t j = 0; j < tau; ++j) {
    const double m = median(recon[j]), r = median(resid[j]);
    monotone = monotone && m >= prev;
    resid_monotone = resid_monotone && r >= prev_r;
    prev = m;
    prev_r = r;
    rc += fmt("%s%.3g", j ? " " : "", m);
    rs += fmt("%s%.3g", j ? " " : "", r);
  }
  return {monotone, fmt("tau=10, median of 3 seeds, per-step MSE in original units [%s] %s; residual scale [%s] %s",
                        rc.c_str(), monotone ? "non-decreasing" : "NOT non-decreasing", rs.c_str(),
                        resid_monotone ? "non-decreasing" : "not monotone (informational)")};
}

// ---------------------------------------------------------------------------

Outcome determinism() {
  synth::GeneratorConfig g;
  g.length = 48 * 10;
  const data::Pretreated data = data::pretreat(synth::generate_panel(synth::default_wds_spec(), g));
  nn::ModelConfig c = small_config(SpatialVariant::Hybrid, 18, 8, 2, 8);
  c.dropout = 0.2;
  train::TrainConfig tc;
  tc.max_epochs = 3;
  tc.patience = 2;
  tc.seed = 77;
  const train::FitResult a = train::fit(c, tc, data);
  const train::FitResult b = train::fit(c, tc, data);
  const bool reports = train::to_json(a.report, true).dump() == train::to_json(b.report, true).dump();
  const bool checkpoints = nn::checkpoint_to_json(a.model).dump() == nn::checkpoint_to_json(b.model).dump();
  const bool values = a.model.parameters() == b.model.parameters();
  return {reports && checkpoints && values,
          fmt("two runs (seed 77, dropout 0.2, %zu epochs): report %s, checkpoint %s, parameters %s",
              a.report.epochs_run, reports ? "identical" : "DIFFER", checkpoints ? "identical" : "DIFFER",
              values ? "bitwise equal" : "DIFFER")};
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937_64 rng(1010);
  std::normal_distribution<double> d(0.0, 1.0);
  double worst = 0.0, worst_rmse = 0.0;
  for (int i = 0; i < kMetricPairs; ++i) {
    const std::size_t windows = 1 + rng() % 50, steps = 1 + rng() % 10;
    eval::Forecasts p(windows, std::vector<double>(steps)), t = p;
    for (std::size_t w = 0; w < windows; ++w)
      for (std::size_t j = 0; j < steps; ++j) {
        p[w][j] = d(rng);
        t[w][j] = d(rng);
      }
    double sq = 0.0, ab = 0.0;
    for (std::size_t w = 0; w < windows; ++w)
      for (std::size_t j = 0; j < steps; ++j) {
        const double e = p[w][j] - t[w][j];
        sq += e * e;
        ab += std::fabs(e);
      }
    const double count = static_cast<double>(windows * steps);
    const eval::MetricSet m = eval::metrics(p, t);
    worst = std::max({worst, std::abs(m.mse - sq / count), std::abs(m.rmse - std::sqrt(sq / count)),
                      std::abs(m.mae - ab / count)});
    worst_rmse = std::max(worst_rmse, std::abs(m.rmse * m.rmse - m.mse));
  }
  return {worst < kMetricTolerance && worst_rmse <= kRmseTolerance,
          fmt("%d random pairs: max |metric - scalar loop| %.2e < %.0e, max |rmse^2 - mse| %.2e <= %.0e", kMetricPairs,
              worst, kMetricTolerance, worst_rmse, kRmseTolerance)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"convexity invariants", convexity},
      {"variant degeneracy", variant_degeneracy},
      {"pretreatment round trip", pretreatment_round_trip},
      {"overfit sanity", overfit},
      {"attention interpretability", attention_interpretability},
      {"attention beats no-attention on long lags", long_lag},
      {"error accumulation", error_accumulation},
      {"determinism", determinism},
      {"metric oracle equivalence", metric_oracle},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
