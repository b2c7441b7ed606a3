#include "ceal/model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ceal {

std::size_t Classifier::num_parameters() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

bool operator==(const Classifier& a, const Classifier& b) {
  if (a.widths != b.widths || a.dropout_rate != b.dropout_rate) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l)
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  return true;
}

void PredictiveSamples::validate() const {
  if (probs.rows() < 1) throw std::invalid_argument("predictive samples: need T >= 1");
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    if ((probs.row(t).array() < 0.0).any())
      throw std::invalid_argument("predictive samples: negative probability");
    if (std::abs(probs.row(t).sum() - 1.0) > 1e-9)
      throw std::invalid_argument("predictive samples: row does not sum to 1");
  }
}

void TrainSpec::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train: momentum must be in [0,1)");
}

int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  int best = 0;
  for (Eigen::Index c = 1; c < v.size(); ++c)
    if (v[c] > v[best]) best = static_cast<int>(c);
  return best;
}

Classifier init_classifier(const std::vector<int>& widths, double dropout_rate, std::uint64_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("classifier: need at least input and output widths");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("classifier: widths must be positive");
  if (widths.back() < 2) throw std::invalid_argument("classifier: need at least 2 output classes");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("classifier: dropout_rate must be in [0,1)");

  Classifier m;
  m.widths = widths;
  m.dropout_rate = dropout_rate;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_in, fan_out);
    for (int i = 0; i < fan_in; ++i)
      for (int j = 0; j < fan_out; ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::RowVectorXd::Zero(fan_out));
  }
  return m;
}

namespace {

void softmax_inplace(Eigen::RowVectorXd& z) {
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  z /= z.sum();
}

void check_input(const Classifier& model, const Features& x) {
  if (x.size() != model.input_dim())
    throw std::invalid_argument("classifier: input width " + std::to_string(x.size()) +
                                " != " + std::to_string(model.input_dim()));
}

void apply_dropout(Eigen::RowVectorXd& h, double p, Rng& rng) {
  if (p == 0.0) return;
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < h.size(); ++j) h[j] = rng.uniform() < p ? 0.0 : h[j] * scale;
}

// Output of the first layer before any dropout. For networks without hidden
// layers this is already the logit vector.
Eigen::RowVectorXd first_layer(const Classifier& model, const Features& x) {
  Eigen::RowVectorXd h = x * model.weights[0] + model.biases[0];
  if (model.num_layers() > 1) h = h.cwiseMax(0.0);
  return h;
}

// Continues a forward pass from the first layer's (pre-dropout) output.
Eigen::RowVectorXd finish_pass(const Classifier& model, Eigen::RowVectorXd h, bool stochastic, Rng& rng) {
  const std::size_t L = model.num_layers();
  for (std::size_t l = 1; l < L; ++l) {
    if (stochastic) apply_dropout(h, model.dropout_rate, rng);
    h = h * model.weights[l] + model.biases[l];
    if (l + 1 < L) h = h.cwiseMax(0.0);
  }
  softmax_inplace(h);
  return h;
}

}  // namespace

Eigen::RowVectorXd inverted_dropout(Eigen::RowVectorXd h, double p, Rng& rng) {
  apply_dropout(h, p, rng);
  return h;
}

Eigen::RowVectorXd forward_proba(const Classifier& model, const Features& x, bool stochastic, Rng& rng) {
  check_input(model, x);
  return finish_pass(model, first_layer(model, x), stochastic, rng);
}

PredictiveSamples mc_predict(const Classifier& model, const Features& x, int t_passes, Rng& rng) {
  if (t_passes < 1) throw std::invalid_argument("mc_predict: t_passes must be >= 1");
  check_input(model, x);
  const Eigen::RowVectorXd first = first_layer(model, x);
  PredictiveSamples out;
  out.probs.resize(t_passes, model.num_classes());
  for (int t = 0; t < t_passes; ++t) out.probs.row(t) = finish_pass(model, first, true, rng);
  return out;
}

double loss_and_gradients(const Classifier& model, const Dataset& data, std::span<const std::size_t> rows,
                          Gradients* grads, Rng* dropout_rng) {
  if (rows.empty()) throw std::invalid_argument("loss: empty row set");
  if (data.feature_dim() != static_cast<std::size_t>(model.input_dim()))
    throw std::invalid_argument("loss: feature width mismatch");
  const auto b = static_cast<Eigen::Index>(rows.size());
  const std::size_t L = model.num_layers();

  // activations[l] is the input to layer l (after ReLU and dropout).
  std::vector<Eigen::MatrixXd> activations(L);
  std::vector<Eigen::MatrixXd> masks(L);
  std::vector<Eigen::MatrixXd> pre(L);
  activations[0].resize(b, model.input_dim());
  for (Eigen::Index i = 0; i < b; ++i)
    activations[0].row(i) = data.features.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));

  const bool drop = dropout_rng != nullptr && model.dropout_rate > 0.0;
  const double scale = drop ? 1.0 / (1.0 - model.dropout_rate) : 1.0;
  Eigen::MatrixXd z;
  for (std::size_t l = 0; l < L; ++l) {
    z = activations[l] * model.weights[l];
    z.rowwise() += model.biases[l];
    if (l + 1 == L) break;
    pre[l] = z;
    Eigen::MatrixXd a = z.cwiseMax(0.0);
    if (drop) {
      masks[l].resize(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
          masks[l](i, j) = dropout_rng->uniform() < model.dropout_rate ? 0.0 : scale;
      a = a.cwiseProduct(masks[l]);
    }
    activations[l + 1] = std::move(a);
  }

  // z holds the logits; turn it into row-wise probabilities.
  double loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    const int y = data.labels[rows[static_cast<std::size_t>(i)]];
    loss += lse - z(i, y);
    z.row(i) = (z.row(i).array() - lse).exp();
  }
  loss /= static_cast<double>(b);
  if (grads == nullptr) return loss;

  Eigen::MatrixXd dz = std::move(z);
  for (Eigen::Index i = 0; i < b; ++i) dz(i, data.labels[rows[static_cast<std::size_t>(i)]]) -= 1.0;
  dz /= static_cast<double>(b);

  grads->weights.resize(L);
  grads->biases.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    grads->weights[l] = activations[l].transpose() * dz;
    grads->biases[l] = dz.colwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd da = dz * model.weights[l].transpose();
    if (drop) da = da.cwiseProduct(masks[l - 1]);
    dz = da.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

Classifier train(Classifier model, const Dataset& data, std::span<const std::size_t> rows,
                 const TrainSpec& spec, std::vector<double>* epoch_losses) {
  spec.validate();
  if (rows.empty()) throw std::invalid_argument("train: empty labeled set");
  for (std::size_t r : rows)
    if (r >= data.size()) throw std::invalid_argument("train: row index out of range");

  Rng rng(spec.seed);
  std::vector<Eigen::MatrixXd> vel_w;
  std::vector<Eigen::RowVectorXd> vel_b;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    vel_w.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    vel_b.push_back(Eigen::RowVectorXd::Zero(model.biases[l].size()));
  }

  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::vector<std::size_t> batch;
  Gradients g;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(spec.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(spec.batch_size));
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
      loss_sum += loss_and_gradients(model, data, batch, &g, &rng) * static_cast<double>(batch.size());
      for (std::size_t l = 0; l < model.num_layers(); ++l) {
        vel_w[l] = spec.momentum * vel_w[l] - spec.learning_rate * g.weights[l];
        vel_b[l] = spec.momentum * vel_b[l] - spec.learning_rate * g.biases[l];
        model.weights[l] += vel_w[l];
        model.biases[l] += vel_b[l];
      }
    }
    if (epoch_losses) epoch_losses->push_back(loss_sum / static_cast<double>(order.size()));
  }
  return model;
}

int predict_class(const Classifier& model, const Features& x) {
  check_input(model, x);
  Rng unused(0);
  return argmax(finish_pass(model, first_layer(model, x), false, unused));
}

double evaluate_accuracy(const Classifier& model, const Dataset& data) {
  if (data.feature_dim() != static_cast<std::size_t>(model.input_dim()))
    throw std::invalid_argument("evaluate_accuracy: feature width mismatch");
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (predict_class(model, data.features.row(static_cast<Eigen::Index>(i))) == data.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void save_classifier(const Classifier& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << std::hexfloat;
  out << "ceal-classifier 1\n" << model.widths.size();
  for (int w : model.widths) out << ' ' << w;
  out << '\n' << model.dropout_rate << '\n';
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < model.weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < model.weights[l].cols(); ++j) out << model.weights[l](i, j) << '\n';
    for (Eigen::Index j = 0; j < model.biases[l].size(); ++j) out << model.biases[l][j] << '\n';
  }
  if (!out) throw std::runtime_error("checkpoint write failed");
}

namespace {

// operator>> does not parse hexfloat reliably across standard libraries.
double read_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw std::runtime_error("checkpoint truncated");
  return std::strtod(tok.c_str(), nullptr);
}

}  // namespace

Classifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::string magic;
  int version = 0;
  std::size_t n = 0;
  in >> magic >> version >> n;
  if (magic != "ceal-classifier" || version != 1 || !in) throw std::runtime_error("bad checkpoint header");
  std::vector<int> widths(n);
  for (auto& w : widths) in >> w;
  if (!in) throw std::runtime_error("checkpoint truncated");
  const double dropout = read_double(in);
  Classifier m = init_classifier(widths, dropout, 0);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < m.weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < m.weights[l].cols(); ++j) m.weights[l](i, j) = read_double(in);
    for (Eigen::Index j = 0; j < m.biases[l].size(); ++j) m.biases[l][j] = read_double(in);
  }
  return m;
}

}  // namespace ceal
