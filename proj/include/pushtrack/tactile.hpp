#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pushtrack/push_sim.hpp"
#include "pushtrack/se2.hpp"

namespace pushtrack {

class Rng;

constexpr int kTactileWidth = 160;
constexpr int kTactileHeight = 120;

/// One synthetic tactile frame: grayscale intensities in [0, 1], row-major,
/// x (width) fastest.
struct TactileImage {
  int width = kTactileWidth;
  int height = kTactileHeight;
  std::vector<float> pixels;

  float at(int x, int y) const { return pixels[y * width + x]; }
  float& at(int x, int y) { return pixels[y * width + x]; }
  size_t size() const { return pixels.size(); }
};

/// No-contact image statistics: flat background level and per-pixel noise
/// sigma, estimated from calibration frames.
struct BackgroundStats {
  double mean = 0.35;
  double sigma = 0.02;
};

/// Rendering knobs for the synthetic sensor.
struct RenderParams {
  double background = 0.35;
  double noise_sigma = 0.02;
  double blob_amplitude = 0.45;
  double minor_sigma_px = 5.5;       // blob minor axis scale, cells
  double pixels_per_meter = 6000.0;  // sensor-frame -> image scaling
};

/// Renders one tactile frame. No contact gives background plus pixel noise;
/// contact adds an elliptical blob whose center is the contact point in the
/// sensor frame and whose orientation/eccentricity follow the local surface
/// geometry relative to the sensor. Deterministic per seed.
TactileImage render_tactile(const Pose2& sensor_pose, const Pose2& object_pose,
                            const ShapeModel& shape, const ContactState& contact,
                            uint64_t noise_seed, const RenderParams& params = {});

/// Lower-level blob renderer used by render_tactile and by tests that need
/// blobs at arbitrary image positions.
TactileImage render_blob(const Eigen::Vector2d& center_px, double orientation,
                         double axis_ratio, uint64_t noise_seed,
                         const RenderParams& params = {});

/// Contact is declared when the fraction of pixels deviating from the
/// background mean by more than 4 sigma exceeds `fraction_threshold`.
bool detect_contact(const TactileImage& image, const BackgroundStats& stats,
                    double fraction_threshold = 0.01);

BackgroundStats estimate_background(const std::vector<TactileImage>& frames);

/// Elliptical patch summary from binary-mask image moments.
struct PatchFeature {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();  // image cells
  double orientation = 0.0;  // axial, (-pi/2, pi/2]
  double axis_major = 0.0;   // cells
  double axis_minor = 0.0;
  bool orientation_defined = true;  // false for near-isotropic patches
  bool valid = false;
};

PatchFeature extract_feature(const TactileImage& image, const BackgroundStats& stats);

/// One-hot class label over the contact classes.
struct ClassLabel {
  int index = 0;

  Eigen::VectorXd one_hot() const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(kNumContactClasses);
    v[index] = 1.0;
    return v;
  }
  static ClassLabel of(ContactClass c) { return {static_cast<int>(c)}; }
};

/// Which patch descriptors feed the transform models; sets are nested.
enum class FeatureSet : int { CenterOnly = 0, CenterOrientation = 1, Full = 2 };

int feature_dim(FeatureSet set);

/// Maps a patch feature to the model input vector: normalized center, the
/// anisotropy-weighted axial encoding (e cos 2phi, e sin 2phi) and
/// normalized axis lengths.
Eigen::VectorXd featurize(const PatchFeature& f, FeatureSet set);

/// One training record: the transform between the object-frame effector
/// poses n_i = o_i^-1 e_i of the two endpoints, in boxminus chart
/// coordinates, keyed by the endpoint features.
struct PairRecord {
  Eigen::VectorXd feat_a;  // featurized endpoint i
  Eigen::VectorXd feat_b;  // featurized endpoint j
  int class_index = 0;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();  // log(n_i^-1 n_j)
  int sequence_id = 0;
};

struct PairDataset {
  FeatureSet feature_set = FeatureSet::Full;
  std::vector<PairRecord> records;
};

/// Extracted per-step tactile summary for one sequence, produced once by a
/// pass over the frame archive.
struct SequenceFeatures {
  BackgroundStats background;
  std::vector<uint8_t> detected;  // detect_contact per step
  std::vector<PatchFeature> features;
};

SequenceFeatures extract_sequence_features(const PushSequence& seq,
                                           const std::vector<TactileImage>& frames,
                                           int calibration_frames = 10);

/// Builds the symmetric pairwise dataset over windows k in [k_min, k_max]:
/// both endpoints must be detected in the same contact episode with valid
/// features; each admissible ordered pair appears in both directions.
PairDataset build_pair_dataset(const std::vector<PushSequence>& sequences,
                               const std::vector<SequenceFeatures>& features,
                               int k_min = 10, int k_max = 40,
                               FeatureSet set = FeatureSet::Full);

enum class ModelKind : int { NoTactile = 0, Const = 1, Linear = 2, Oracle = 3 };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Transform prediction model. Linear is a ridge regression on the
/// class-conditioned pair features; Const predicts the per-class mean
/// transform; Oracle returns the supplied ground truth plus Gaussian noise.
class TransformModel {
 public:
  TransformModel() = default;

  static TransformModel make_const(const PairDataset& train);
  static TransformModel make_oracle(const Eigen::Vector3d& noise_sigmas);

  ModelKind kind() const { return kind_; }
  FeatureSet feature_set() const { return feature_set_; }

  /// Prediction of between(n_i, n_j) from the two endpoint features.
  /// Oracle requires gt; Linear requires valid features on both endpoints.
  std::optional<Pose2> predict(const PatchFeature& f_i, const PatchFeature& f_j,
                               const ClassLabel& label,
                               const std::optional<Pose2>& gt, Rng* rng) const;

  /// Mean-squared validation loss in the symmetric-pair convention: per
  /// unordered pair, forward plus backward squared chart error.
  double mse(const PairDataset& data) const;

  // Serialization helpers (JSON handled in io.cpp).
  ModelKind kind_ = ModelKind::Const;
  FeatureSet feature_set_ = FeatureSet::Full;
  bool class_conditioned = true;
  Eigen::MatrixXd weights;      // 3 x (2 * feature_dim * n_classes)
  Eigen::Vector3d bias = Eigen::Vector3d::Zero();
  Eigen::VectorXd input_mean;   // input standardization
  Eigen::VectorXd input_scale;
  std::vector<Eigen::Vector3d> class_means;  // Const
  Eigen::Vector3d oracle_sigmas = Eigen::Vector3d::Zero();

  Eigen::VectorXd stack_input(const Eigen::VectorXd& fa, const Eigen::VectorXd& fb,
                              int class_index) const;
  Eigen::Vector3d predict_chart(const PairRecord& rec) const;
};

struct TrainReport {
  double train_mse = 0.0;
  double validation_mse = 0.0;
  size_t train_records = 0;
  size_t validation_records = 0;
};

/// Closed-form ridge regression on [f_i (x) c, f_j (x) c, 1] -> chart target,
/// trained on the even-sequence half with the odd half as validation (50-50
/// split by sequence). Throws std::runtime_error when the normal matrix is
/// rank-deficient at ridge 0.
TransformModel train_linear(const PairDataset& dataset, bool class_conditioning,
                            double ridge, TrainReport* report = nullptr);

/// Same split as train_linear, for the const baseline's validation loss.
void split_dataset(const PairDataset& dataset, PairDataset& train, PairDataset& val);

}  // namespace pushtrack
