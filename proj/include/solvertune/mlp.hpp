#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "solvertune/dataset.hpp"
#include "solvertune/errors.hpp"
#include "solvertune/metrics.hpp"
#include "solvertune/param_space.hpp"
#include "solvertune/rng.hpp"

namespace solvertune {

/// Epoch schedule as a function of the training set size.
inline long epochs_for(long n_train) {
  if (n_train < 0) throw ConfigError("epochs_for: negative training size");
  return n_train / 50 + 50;
}

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;
  long epochs = 0;  // 0: epochs_for(n_train)
  double dropout_rate = 0.25;
  std::uint64_t seed = 0;
};

/// ADAM moment state for one flat parameter array.
struct AdamState {
  std::vector<double> m, v;
  long t = 0;
  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected ADAM update of `params` given `grads`.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& state, const TrainConfig& cfg) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

/// Fully-connected regression network: sigmoid hidden layers, linear output,
/// fixed 512/256/128 hidden widths in training; weights row-major [in][out].
/// Targets are standardized during training; predict() undoes it.
struct MlpModel {
  std::uint64_t space_fingerprint = 0;
  int input_dim = 0;
  std::vector<int> widths;             // per layer: hidden..., 1
  std::vector<std::vector<double>> w;  // w[l] has size in_l * out_l
  std::vector<std::vector<double>> b;  // b[l] has size out_l
  double target_mean = 0.0;
  double target_std = 1.0;

  static const std::vector<int>& hidden_widths() {
    static const std::vector<int> h{512, 256, 128};
    return h;
  }

  std::size_t layers() const { return widths.size(); }
  int in_dim(std::size_t l) const { return l == 0 ? input_dim : widths[l - 1]; }

  void init(std::uint64_t fingerprint, int inputs, const std::vector<int>& hidden, Rng& rng) {
    space_fingerprint = fingerprint;
    input_dim = inputs;
    widths = hidden;
    widths.push_back(1);
    w.assign(widths.size(), {});
    b.assign(widths.size(), {});
    for (std::size_t l = 0; l < widths.size(); ++l) {
      const int fan_in = in_dim(l), fan_out = widths[l];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      w[l].resize(static_cast<std::size_t>(fan_in) * fan_out);
      for (double& x : w[l]) x = rng.real(-bound, bound);
      b[l].assign(static_cast<std::size_t>(fan_out), 0.0);
    }
  }

  /// Forward pass for one standardized-input sample, dropout off.
  double forward_one(const std::vector<double>& in) const {
    std::vector<double> cur = in, next;
    for (std::size_t l = 0; l < layers(); ++l) {
      const int ni = in_dim(l), no = widths[l];
      next.assign(static_cast<std::size_t>(no), 0.0);
      for (int j = 0; j < no; ++j) next[j] = b[l][j];
      for (int i = 0; i < ni; ++i) {
        const double a = cur[i];
        if (a == 0.0) continue;
        const double* wr = &w[l][static_cast<std::size_t>(i) * no];
        for (int j = 0; j < no; ++j) next[j] += a * wr[j];
      }
      if (l + 1 < layers())
        for (double& x : next) x = 1.0 / (1.0 + std::exp(-x));
      cur.swap(next);
    }
    return cur[0];
  }

  void save(std::ostream& out, const RunManifest* manifest = nullptr) const;
  void save(const std::string& path, const RunManifest* manifest = nullptr) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    save(out, manifest);
  }
  static MlpModel load(std::istream& in, const std::string& name);
  static MlpModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    return load(in, path);
  }
};

namespace mlp_detail {

/// Batched affine + activation workspace for training.
struct BatchBuffers {
  // activations[l]: batch x widths[l]; activations[0] is the input batch
  std::vector<std::vector<double>> act;    // post-activation (and post-dropout)
  std::vector<std::vector<double>> delta;  // layer error signals
  std::vector<std::vector<double>> mask;   // dropout masks for hidden layers
};

}  // namespace mlp_detail

/// Loss and gradient of the batch MSE at the given parameters; dropout
/// applied only when `dropout_rng` is non-null. Exposed for the finite
/// difference gradient checks.
inline double mlp_loss_and_grad(const MlpModel& model, const std::vector<std::vector<double>>& x,
                                const std::vector<double>& y_std,
                                std::vector<std::vector<double>>& grad_w,
                                std::vector<std::vector<double>>& grad_b, double dropout_rate,
                                Rng* dropout_rng) {
  const std::size_t batch = x.size();
  const std::size_t layers = model.layers();
  mlp_detail::BatchBuffers buf;
  buf.act.resize(layers + 1);
  buf.delta.resize(layers);
  buf.mask.assign(layers, {});
  buf.act[0].resize(batch * static_cast<std::size_t>(model.input_dim));
  for (std::size_t s = 0; s < batch; ++s)
    for (int i = 0; i < model.input_dim; ++i)
      buf.act[0][s * model.input_dim + i] = x[s][i];

  // forward
  for (std::size_t l = 0; l < layers; ++l) {
    const int ni = model.in_dim(l), no = model.widths[l];
    buf.act[l + 1].assign(batch * static_cast<std::size_t>(no), 0.0);
    for (std::size_t s = 0; s < batch; ++s) {
      double* out = &buf.act[l + 1][s * no];
      const double* in = &buf.act[l][s * ni];
      for (int j = 0; j < no; ++j) out[j] = model.b[l][j];
      for (int i = 0; i < ni; ++i) {
        const double a = in[i];
        if (a == 0.0) continue;
        const double* wr = &model.w[l][static_cast<std::size_t>(i) * no];
        for (int j = 0; j < no; ++j) out[j] += a * wr[j];
      }
    }
    if (l + 1 < layers) {
      double* a = buf.act[l + 1].data();
      const std::size_t count = batch * static_cast<std::size_t>(no);
      for (std::size_t k = 0; k < count; ++k) a[k] = 1.0 / (1.0 + std::exp(-a[k]));
      if (dropout_rng && dropout_rate > 0.0) {
        buf.mask[l].resize(count);
        const double keep = 1.0 - dropout_rate;
        for (std::size_t k = 0; k < count; ++k)
          buf.mask[l][k] = dropout_rng->real01() < keep ? 1.0 / keep : 0.0;
        for (std::size_t k = 0; k < count; ++k) a[k] *= buf.mask[l][k];
      }
    }
  }

  // loss and output delta
  const std::vector<double>& out = buf.act[layers];
  double loss = 0.0;
  buf.delta[layers - 1].resize(batch);
  for (std::size_t s = 0; s < batch; ++s) {
    const double d = out[s] - y_std[s];
    loss += d * d;
    buf.delta[layers - 1][s] = 2.0 * d / static_cast<double>(batch);
  }
  loss /= static_cast<double>(batch);

  // backward
  grad_w.assign(layers, {});
  grad_b.assign(layers, {});
  for (std::size_t l = layers; l-- > 0;) {
    const int ni = model.in_dim(l), no = model.widths[l];
    grad_w[l].assign(static_cast<std::size_t>(ni) * no, 0.0);
    grad_b[l].assign(static_cast<std::size_t>(no), 0.0);
    for (std::size_t s = 0; s < batch; ++s) {
      const double* dl = &buf.delta[l][s * no];
      const double* in = &buf.act[l][s * ni];
      for (int j = 0; j < no; ++j) grad_b[l][j] += dl[j];
      for (int i = 0; i < ni; ++i) {
        const double a = in[i];
        if (a == 0.0) continue;
        double* gw = &grad_w[l][static_cast<std::size_t>(i) * no];
        for (int j = 0; j < no; ++j) gw[j] += a * dl[j];
      }
    }
    if (l == 0) break;
    const int nprev = model.in_dim(l);
    buf.delta[l - 1].assign(batch * static_cast<std::size_t>(nprev), 0.0);
    for (std::size_t s = 0; s < batch; ++s) {
      const double* dl = &buf.delta[l][s * no];
      const double* a_prev = &buf.act[l][s * nprev];
      double* dprev = &buf.delta[l - 1][s * nprev];
      for (int i = 0; i < nprev; ++i) {
        const double* wr = &model.w[l][static_cast<std::size_t>(i) * no];
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        int j = 0;
        for (; j + 4 <= no; j += 4) {
          s0 += wr[j] * dl[j];
          s1 += wr[j + 1] * dl[j + 1];
          s2 += wr[j + 2] * dl[j + 2];
          s3 += wr[j + 3] * dl[j + 3];
        }
        double s_all = ((s0 + s1) + (s2 + s3));
        for (; j < no; ++j) s_all += wr[j] * dl[j];
        // post-activation value already includes the dropout mask; sigmoid'
        // in terms of the pre-dropout activation
        double act_val = a_prev[i];
        double mask_val = 1.0;
        if (!buf.mask[l - 1].empty()) {
          mask_val = buf.mask[l - 1][s * static_cast<std::size_t>(nprev) + i];
          act_val = mask_val != 0.0 ? act_val / mask_val : 0.0;
        }
        dprev[i] = s_all * mask_val * act_val * (1.0 - act_val);
      }
    }
  }
  return loss;
}

struct TrainReport {
  long epochs = 0;
  long steps = 0;
  double final_train_mse = 0.0;  // standardized units, last epoch average
};

/// Trains the regression surrogate on a dataset with finite targets only
/// (balanced or unbalanced stage). Inputs are the normalized grid
/// coordinates; targets are standardized internally. Deterministic given the
/// seed.
inline MlpModel train_mlp(const SearchSpace& space, const Dataset& data, TrainConfig cfg = {},
                          TrainReport* report = nullptr) {
  if (data.space_fingerprint != space.fingerprint())
    throw ConfigError("train: dataset space fingerprint " +
                      fingerprint_hex(data.space_fingerprint) + " does not match space " +
                      fingerprint_hex(space.fingerprint()));
  if (data.samples.empty()) throw ConfigError("train: empty dataset");
  for (const FitnessSample& s : data.samples)
    if (!std::isfinite(s.value))
      throw ConfigError("train: dataset contains non-finite fitness values; balance it first");

  const std::size_t n = data.samples.size();
  std::vector<std::vector<double>> inputs(n);
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    inputs[i] = normalize(space, data.samples[i].vector);
    targets[i] = data.samples[i].value;
  }
  double mean = 0.0;
  for (double t : targets) mean += t;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double t : targets) var += (t - mean) * (t - mean);
  var /= static_cast<double>(n);
  const double stdev = var > 0.0 ? std::sqrt(var) : 1.0;
  std::vector<double> y_std(n);
  for (std::size_t i = 0; i < n; ++i) y_std[i] = (targets[i] - mean) / stdev;

  Rng rng(cfg.seed);
  MlpModel model;
  model.init(space.fingerprint(), static_cast<int>(space.dims()), MlpModel::hidden_widths(), rng);
  model.target_mean = mean;
  model.target_std = stdev;

  std::vector<AdamState> adam_w, adam_b;
  for (std::size_t l = 0; l < model.layers(); ++l) {
    adam_w.emplace_back(model.w[l].size());
    adam_b.emplace_back(model.b[l].size());
  }

  const long epochs = cfg.epochs > 0 ? cfg.epochs : epochs_for(static_cast<long>(n));
  const std::size_t batch_size = static_cast<std::size_t>(std::max(1, cfg.batch_size));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::vector<std::vector<double>> grad_w, grad_b;
  long steps = 0;
  double last_epoch_mse = 0.0;
  for (long e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t end = std::min(n, start + batch_size);
      std::vector<std::vector<double>> bx;
      std::vector<double> by;
      bx.reserve(end - start);
      by.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        bx.push_back(inputs[order[k]]);
        by.push_back(y_std[order[k]]);
      }
      epoch_loss +=
          mlp_loss_and_grad(model, bx, by, grad_w, grad_b, cfg.dropout_rate, &rng);
      ++batches;
      for (std::size_t l = 0; l < model.layers(); ++l) {
        adam_step(model.w[l], grad_w[l], adam_w[l], cfg);
        adam_step(model.b[l], grad_b[l], adam_b[l], cfg);
      }
      ++steps;
    }
    last_epoch_mse = epoch_loss / static_cast<double>(batches);
  }
  if (report) {
    report->epochs = epochs;
    report->steps = steps;
    report->final_train_mse = last_epoch_mse;
  }
  return model;
}

/// Deterministic batch prediction in fitness units; dropout disabled. Runs
/// the same layer arithmetic as forward_one, blocked over the batch so the
/// filter's large trial pools stay cheap.
inline std::vector<double> predict(const MlpModel& model, const SearchSpace& space,
                                   const std::vector<ParameterVector>& vectors) {
  if (model.space_fingerprint != space.fingerprint())
    throw ConfigError("predict: model fingerprint " + fingerprint_hex(model.space_fingerprint) +
                      " does not match space " + fingerprint_hex(space.fingerprint()));
  std::vector<double> out;
  out.reserve(vectors.size());
  const std::size_t block = 64;
  std::vector<double> cur, next;
  for (std::size_t base = 0; base < vectors.size(); base += block) {
    const std::size_t batch = std::min(block, vectors.size() - base);
    cur.assign(batch * static_cast<std::size_t>(model.input_dim), 0.0);
    for (std::size_t s = 0; s < batch; ++s) {
      const std::vector<double> x = normalize(space, vectors[base + s]);
      for (int i = 0; i < model.input_dim; ++i) cur[s * model.input_dim + i] = x[i];
    }
    for (std::size_t l = 0; l < model.layers(); ++l) {
      const int ni = model.in_dim(l), no = model.widths[l];
      next.assign(batch * static_cast<std::size_t>(no), 0.0);
      for (std::size_t s = 0; s < batch; ++s) {
        double* o = &next[s * no];
        const double* in = &cur[s * ni];
        for (int j = 0; j < no; ++j) o[j] = model.b[l][j];
        for (int i = 0; i < ni; ++i) {
          const double a = in[i];
          if (a == 0.0) continue;
          const double* wr = &model.w[l][static_cast<std::size_t>(i) * no];
          for (int j = 0; j < no; ++j) o[j] += a * wr[j];
        }
      }
      if (l + 1 < model.layers())
        for (double& x : next) x = 1.0 / (1.0 + std::exp(-x));
      cur.swap(next);
    }
    for (std::size_t s = 0; s < batch; ++s)
      out.push_back(cur[s] * model.target_std + model.target_mean);
  }
  return out;
}

/// Validation metrics in fitness units: MSE, R^2 and F_alpha at the given
/// fractions (fractions that select zero samples are skipped).
inline PredictionMetrics evaluate_model(const MlpModel& model, const SearchSpace& space,
                                        const Dataset& validation,
                                        const std::vector<double>& alphas = {0.002, 0.01, 0.05,
                                                                             0.2}) {
  std::vector<ParameterVector> vectors;
  std::vector<double> truth;
  vectors.reserve(validation.samples.size());
  for (const FitnessSample& s : validation.samples) {
    vectors.push_back(s.vector);
    truth.push_back(s.value);
  }
  const std::vector<double> pred = predict(model, space, vectors);
  PredictionMetrics m;
  m.mse = mean_squared_error(truth, pred);
  m.r_squared = r_squared(truth, pred);
  for (double a : alphas) {
    const std::size_t n_alpha =
        static_cast<std::size_t>(std::floor(a * static_cast<double>(truth.size())));
    if (n_alpha >= 1) m.f_alpha[a] = f_alpha(truth, pred, a);
  }
  return m;
}

// --------------------------------------------------------------------------
// model file format

inline void MlpModel::save(std::ostream& out, const RunManifest* manifest) const {
  out << "# solvertune model v1\n";
  if (manifest) out << manifest->render("# ");
  out << "space " << fingerprint_hex(space_fingerprint) << "\n";
  out << "input_dim " << input_dim << "\n";
  out << "layers";
  for (int width : widths) out << " " << width;
  out << "\n";
  out << "target_mean " << detail::format_double(target_mean) << "\n";
  out << "target_std " << detail::format_double(target_std) << "\n";
  for (std::size_t l = 0; l < layers(); ++l) {
    out << "layer " << l << "\n";
    for (double x : w[l]) out << detail::format_double(x) << "\n";
    for (double x : b[l]) out << detail::format_double(x) << "\n";
  }
}

inline MlpModel MlpModel::load(std::istream& in, const std::string& name) {
  MlpModel m;
  std::string line;
  auto fail = [&](const std::string& msg) -> void { throw ConfigError(name + ": " + msg); };
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "space") {
      std::string hex;
      ss >> hex;
      m.space_fingerprint = std::stoull(hex, nullptr, 16);
    } else if (key == "input_dim") {
      ss >> m.input_dim;
    } else if (key == "layers") {
      int width = 0;
      while (ss >> width) m.widths.push_back(width);
    } else if (key == "target_mean") {
      ss >> m.target_mean;
    } else if (key == "target_std") {
      ss >> m.target_std;
    } else if (key == "layer") {
      have_header = true;
      std::size_t l = 0;
      ss >> l;
      if (m.widths.empty() || m.input_dim <= 0) fail("layer data before shape header");
      if (l != m.w.size()) fail("unexpected layer index");
      const std::size_t ni = static_cast<std::size_t>(m.in_dim(l));
      const std::size_t no = static_cast<std::size_t>(m.widths[l]);
      std::vector<double> wl(ni * no), bl(no);
      for (double& x : wl)
        if (!(in >> x)) fail("truncated weight block in layer " + std::to_string(l));
      for (double& x : bl)
        if (!(in >> x)) fail("truncated bias block in layer " + std::to_string(l));
      in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
      m.w.push_back(std::move(wl));
      m.b.push_back(std::move(bl));
    } else {
      fail("unknown line '" + line + "'");
    }
  }
  if (!have_header || m.w.size() != m.widths.size()) fail("incomplete model file");
  return m;
}

}  // namespace solvertune
