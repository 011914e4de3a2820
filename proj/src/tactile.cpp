#include "pushtrack/tactile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "pushtrack/rng.hpp"

namespace pushtrack {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::NoTactile:
      return "notactile";
    case ModelKind::Const:
      return "const";
    case ModelKind::Linear:
      return "linear";
    case ModelKind::Oracle:
      return "oracle";
  }
  return "const";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "notactile") return ModelKind::NoTactile;
  if (name == "const") return ModelKind::Const;
  if (name == "linear") return ModelKind::Linear;
  if (name == "oracle") return ModelKind::Oracle;
  throw std::invalid_argument("unknown model kind: " + name);
}

TactileImage render_blob(const Eigen::Vector2d& center_px, double orientation,
                         double axis_ratio, uint64_t noise_seed,
                         const RenderParams& params) {
  TactileImage img;
  img.pixels.resize(static_cast<size_t>(img.width) * img.height);
  Rng rng(noise_seed);
  for (auto& p : img.pixels)
    p = static_cast<float>(params.background + rng.normal(0.0, params.noise_sigma));

  if (axis_ratio > 0.0) {
    const double s_min = params.minor_sigma_px;
    const double s_maj = axis_ratio * s_min;
    const double c = std::cos(orientation), s = std::sin(orientation);
    const double reach = 4.0 * s_maj;
    const int x0 = std::max(0, static_cast<int>(std::floor(center_px.x() - reach)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(center_px.x() + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(center_px.y() - reach)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(center_px.y() + reach)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - center_px.x(), dy = y - center_px.y();
        const double u = c * dx + s * dy;   // along the major axis
        const double v = -s * dx + c * dy;  // along the minor axis
        const double q = (u * u) / (s_maj * s_maj) + (v * v) / (s_min * s_min);
        img.at(x, y) += static_cast<float>(params.blob_amplitude * std::exp(-0.5 * q));
      }
  }
  for (auto& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
  return img;
}

namespace {

double curvature_to_ratio(double curvature) {
  return 1.4 + 2.2 / (1.0 + 0.02 * curvature);
}

}  // namespace

TactileImage render_tactile(const Pose2& sensor_pose, const Pose2& object_pose,
                            const ShapeModel& shape, const ContactState& contact,
                            uint64_t noise_seed, const RenderParams& params) {
  if (!contact.in_contact)
    return render_blob(Eigen::Vector2d::Zero(), 0.0, 0.0, noise_seed, params);

  const Eigen::Vector2d in_sensor = transform_to(sensor_pose, contact.contact_point);
  const Eigen::Vector2d center_px =
      Eigen::Vector2d(kTactileWidth / 2.0, kTactileHeight / 2.0) +
      params.pixels_per_meter * in_sensor;

  const Eigen::Vector2d p_obj = transform_to(object_pose, contact.contact_point);
  const SurfacePatch patch = surface_patch(shape, p_obj);
  // Patch axis in the sensor frame: object-frame tangent carried through the
  // relative orientation of sensor and object.
  const double orientation =
      patch.tangent_angle + object_pose.theta - sensor_pose.theta;
  const double ratio =
      patch.is_corner ? 1.5 : curvature_to_ratio(patch.curvature);
  return render_blob(center_px, orientation, ratio, noise_seed, params);
}

bool detect_contact(const TactileImage& image, const BackgroundStats& stats,
                    double fraction_threshold) {
  const double gate = 4.0 * stats.sigma;
  size_t count = 0;
  for (const float p : image.pixels)
    if (std::abs(p - stats.mean) > gate) ++count;
  const double fraction = static_cast<double>(count) / image.size();
  return fraction > fraction_threshold;
}

BackgroundStats estimate_background(const std::vector<TactileImage>& frames) {
  if (frames.empty()) throw std::invalid_argument("estimate_background: no frames");
  double sum = 0.0;
  size_t n = 0;
  for (const auto& f : frames) {
    for (const float p : f.pixels) sum += p;
    n += f.size();
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (const auto& f : frames)
    for (const float p : f.pixels) ss += (p - mean) * (p - mean);
  return {mean, std::sqrt(ss / n)};
}

PatchFeature extract_feature(const TactileImage& image, const BackgroundStats& stats) {
  PatchFeature out;
  const double gate = 4.0 * stats.sigma;
  double m00 = 0.0, mx = 0.0, my = 0.0;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (std::abs(image.at(x, y) - stats.mean) > gate) {
        m00 += 1.0;
        mx += x;
        my += y;
      }
  if (m00 < 8.0) return out;  // valid stays false
  const double cx = mx / m00, cy = my / m00;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (std::abs(image.at(x, y) - stats.mean) > gate) {
        const double dx = x - cx, dy = y - cy;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
      }
  sxx /= m00;
  syy /= m00;
  sxy /= m00;
  const double tr = 0.5 * (sxx + syy);
  const double det = std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
  const double l1 = tr + det, l2 = std::max(tr - det, 0.0);
  out.center = {cx, cy};
  out.orientation = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  if (out.orientation <= -M_PI / 2.0) out.orientation += M_PI;
  out.axis_major = 2.0 * std::sqrt(l1);
  out.axis_minor = 2.0 * std::sqrt(l2);
  out.orientation_defined = l1 > 0.0 && (1.0 - l2 / l1) > 0.05;
  out.valid = true;
  return out;
}

int feature_dim(FeatureSet set) {
  switch (set) {
    case FeatureSet::CenterOnly:
      return 2;
    case FeatureSet::CenterOrientation:
      return 4;
    case FeatureSet::Full:
      return 6;
  }
  return 6;
}

Eigen::VectorXd featurize(const PatchFeature& f, FeatureSet set) {
  Eigen::VectorXd u(feature_dim(set));
  u[0] = (f.center.x() - kTactileWidth / 2.0) / kTactileWidth;
  u[1] = (f.center.y() - kTactileHeight / 2.0) / kTactileHeight;
  if (set == FeatureSet::CenterOnly) return u;
  // Anisotropy-weighted axial encoding: well defined even for isotropic
  // patches where the orientation itself is not.
  const double ratio = f.axis_major > 0.0 ? f.axis_minor / f.axis_major : 1.0;
  const double e = 1.0 - ratio * ratio;
  u[2] = e * std::cos(2.0 * f.orientation);
  u[3] = e * std::sin(2.0 * f.orientation);
  if (set == FeatureSet::CenterOrientation) return u;
  u[4] = f.axis_major / kTactileHeight;
  u[5] = f.axis_minor / kTactileHeight;
  return u;
}

SequenceFeatures extract_sequence_features(const PushSequence& seq,
                                           const std::vector<TactileImage>& frames,
                                           int calibration_frames) {
  if (frames.size() != static_cast<size_t>(seq.num_steps()))
    throw std::invalid_argument("extract_sequence_features: frame count mismatch");
  SequenceFeatures out;
  const int ncal = std::min<int>(calibration_frames, static_cast<int>(frames.size()));
  out.background = estimate_background(
      std::vector<TactileImage>(frames.begin(), frames.begin() + ncal));
  out.detected.resize(frames.size());
  out.features.resize(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    out.detected[i] = detect_contact(frames[i], out.background) ? 1 : 0;
    out.features[i] = out.detected[i] ? extract_feature(frames[i], out.background)
                                      : PatchFeature{};
  }
  return out;
}

PairDataset build_pair_dataset(const std::vector<PushSequence>& sequences,
                               const std::vector<SequenceFeatures>& features,
                               int k_min, int k_max, FeatureSet set) {
  if (sequences.size() != features.size())
    throw std::invalid_argument("build_pair_dataset: size mismatch");
  PairDataset data;
  data.feature_set = set;
  for (size_t si = 0; si < sequences.size(); ++si) {
    const PushSequence& seq = sequences[si];
    const SequenceFeatures& feat = features[si];
    for (int t = 0; t < seq.num_steps(); ++t) {
      if (!feat.detected[t] || !feat.features[t].valid) continue;
      const int ep = seq.steps[t].episode;
      if (ep < 0) continue;
      for (int k = k_min; k <= k_max; ++k) {
        const int a = t - k;
        if (a < 0) break;
        if (!feat.detected[a] || !feat.features[a].valid) continue;
        if (seq.steps[a].episode != ep) continue;
        const auto label = seq.class_at(t);
        if (!label) continue;
        const Pose2 n_a = between(seq.steps[a].object_pose_gt, seq.steps[a].effector_pose_gt);
        const Pose2 n_b = between(seq.steps[t].object_pose_gt, seq.steps[t].effector_pose_gt);
        const Eigen::Vector3d fwd = log_map(between(n_a, n_b));
        PairRecord rec;
        rec.class_index = static_cast<int>(*label);
        rec.sequence_id = static_cast<int>(si);
        rec.feat_a = featurize(feat.features[a], set);
        rec.feat_b = featurize(feat.features[t], set);
        rec.target = fwd;
        data.records.push_back(rec);
        std::swap(rec.feat_a, rec.feat_b);
        rec.target = log_map(between(n_b, n_a));
        data.records.push_back(std::move(rec));
      }
    }
  }
  return data;
}

Eigen::VectorXd TransformModel::stack_input(const Eigen::VectorXd& fa,
                                            const Eigen::VectorXd& fb,
                                            int class_index) const {
  const int d = static_cast<int>(fa.size());
  if (!class_conditioned) {
    Eigen::VectorXd x(2 * d);
    x << fa, fb;
    return x;
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * d * kNumContactClasses);
  x.segment(class_index * d, d) = fa;
  x.segment(kNumContactClasses * d + class_index * d, d) = fb;
  return x;
}

TransformModel TransformModel::make_const(const PairDataset& train) {
  TransformModel m;
  m.kind_ = ModelKind::Const;
  m.feature_set_ = train.feature_set;
  m.class_means.assign(kNumContactClasses, Eigen::Vector3d::Zero());
  std::vector<int> counts(kNumContactClasses, 0);
  for (const auto& rec : train.records) {
    m.class_means[rec.class_index] += rec.target;
    ++counts[rec.class_index];
  }
  for (int c = 0; c < kNumContactClasses; ++c)
    if (counts[c] > 0) m.class_means[c] /= counts[c];
  return m;
}

TransformModel TransformModel::make_oracle(const Eigen::Vector3d& noise_sigmas) {
  TransformModel m;
  m.kind_ = ModelKind::Oracle;
  m.oracle_sigmas = noise_sigmas;
  return m;
}

std::optional<Pose2> TransformModel::predict(const PatchFeature& f_i,
                                             const PatchFeature& f_j,
                                             const ClassLabel& label,
                                             const std::optional<Pose2>& gt,
                                             Rng* rng) const {
  switch (kind_) {
    case ModelKind::NoTactile:
      return std::nullopt;
    case ModelKind::Const:
      return exp_map(class_means.at(label.index));
    case ModelKind::Linear: {
      if (!f_i.valid || !f_j.valid) return std::nullopt;
      const Eigen::VectorXd x = stack_input(featurize(f_i, feature_set_),
                                            featurize(f_j, feature_set_), label.index);
      const Eigen::VectorXd xs =
          (x - input_mean).cwiseQuotient(input_scale);
      return exp_map(Eigen::Vector3d(weights * xs + bias));
    }
    case ModelKind::Oracle: {
      if (!gt) return std::nullopt;
      Eigen::Vector3d eta = Eigen::Vector3d::Zero();
      if (rng)
        for (int i = 0; i < 3; ++i) eta[i] = rng->normal(0.0, oracle_sigmas[i]);
      return boxplus(*gt, eta);
    }
  }
  return std::nullopt;
}

Eigen::Vector3d TransformModel::predict_chart(const PairRecord& rec) const {
  switch (kind_) {
    case ModelKind::Const:
      return class_means.at(rec.class_index);
    case ModelKind::Linear: {
      const Eigen::VectorXd x = stack_input(rec.feat_a, rec.feat_b, rec.class_index);
      return weights * ((x - input_mean).cwiseQuotient(input_scale)) + bias;
    }
    case ModelKind::Oracle:
      return rec.target;  // noise-free for loss reporting
    case ModelKind::NoTactile:
      return Eigen::Vector3d::Zero();
  }
  return Eigen::Vector3d::Zero();
}

double TransformModel::mse(const PairDataset& data) const {
  if (data.records.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& rec : data.records)
    sum += (rec.target - predict_chart(rec)).squaredNorm();
  // Symmetric-pair convention: forward plus backward error per unordered
  // pair; the records already enumerate both directions.
  return 2.0 * sum / data.records.size();
}

void split_dataset(const PairDataset& dataset, PairDataset& train, PairDataset& val) {
  train.feature_set = val.feature_set = dataset.feature_set;
  train.records.clear();
  val.records.clear();
  bool multi_seq = false;
  for (const auto& rec : dataset.records)
    if (rec.sequence_id != dataset.records.front().sequence_id) {
      multi_seq = true;
      break;
    }
  for (size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& rec = dataset.records[i];
    const bool to_train = multi_seq ? rec.sequence_id % 2 == 0 : i % 2 == 0;
    (to_train ? train : val).records.push_back(rec);
  }
}

TransformModel train_linear(const PairDataset& dataset, bool class_conditioning,
                            double ridge, TrainReport* report) {
  if (dataset.records.empty())
    throw std::invalid_argument("train_linear: empty dataset");
  PairDataset train, val;
  split_dataset(dataset, train, val);
  if (train.records.empty()) train = dataset;

  TransformModel m;
  m.kind_ = ModelKind::Linear;
  m.feature_set_ = dataset.feature_set;
  m.class_conditioned = class_conditioning;

  const size_t n = train.records.size();
  const int dim = static_cast<int>(
      m.stack_input(train.records[0].feat_a, train.records[0].feat_b, 0).size());

  Eigen::MatrixXd x(n, dim);
  Eigen::MatrixXd y(n, 3);
  for (size_t i = 0; i < n; ++i) {
    const auto& rec = train.records[i];
    x.row(i) = m.stack_input(rec.feat_a, rec.feat_b, rec.class_index).transpose();
    y.row(i) = rec.target.transpose();
  }
  m.input_mean = x.colwise().mean().transpose();
  Eigen::MatrixXd xc = x.rowwise() - m.input_mean.transpose();
  Eigen::VectorXd scale = (xc.array().square().colwise().mean()).sqrt().transpose();
  for (int j = 0; j < scale.size(); ++j)
    if (scale[j] < 1e-12) scale[j] = 1.0;
  m.input_scale = scale;
  xc = xc.array().rowwise() / scale.transpose().array();

  const Eigen::RowVector3d y_mean = y.colwise().mean();
  const Eigen::MatrixXd yc = y.rowwise() - y_mean;

  Eigen::MatrixXd normal = xc.transpose() * xc;
  normal.diagonal().array() += ridge * static_cast<double>(n);
  if (ridge <= 0.0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
    const double emax = eig.eigenvalues().maxCoeff();
    if (eig.eigenvalues().minCoeff() < 1e-12 * std::max(emax, 1.0))
      throw std::runtime_error(
          "train_linear: rank-deficient normal matrix at ridge=0; retry with ridge>0");
  }
  const Eigen::MatrixXd w = normal.ldlt().solve(xc.transpose() * yc);
  m.weights = w.transpose();
  m.bias = y_mean.transpose();

  if (report) {
    report->train_mse = m.mse(train);
    report->validation_mse = val.records.empty() ? m.mse(train) : m.mse(val);
    report->train_records = train.records.size();
    report->validation_records = val.records.size();
  }
  return m;
}

}  // namespace pushtrack
