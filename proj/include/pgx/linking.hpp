#pragma once

// Within-scan linking of predicted tumours to reference tumours, longitudinal tracking of tumours
// across a patient's scans, anomaly flagging and treatment censoring.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pgx/morphology.hpp"
#include "pgx/volume_io.hpp"

namespace pgx {

inline constexpr double kDefaultMinComponentCc = 0.1;

struct LinkResult {
  std::vector<std::pair<int, int>> matches;  // (prediction id, reference id)
  std::vector<int> unmatched_predictions;
  std::vector<int> unmatched_references;
  std::vector<int> discarded_predictions;  // below the volume threshold, never linked
};

struct ScanLink {
  std::vector<TumorComponent> predictions;  // every prediction component, ids 1..k
  std::vector<TumorComponent> references;   // components of the unsubtracted reference
  LinkResult result;
};

/// Links prediction components to reference components by looking up each kept prediction's
/// centroid voxel in the reference with vessels still included. Several predictions may link
/// to the same reference.
ScanLink link_pred_to_ref(const LabelVolume& pred, const LabelVolume& ref_with_vessels,
                          double min_volume_cc = kDefaultMinComponentCc,
                          Connectivity conn = Connectivity::TwentySix);

struct DetectionCounts {
  std::int64_t true_positive = 0;
  std::int64_t false_positive = 0;
  std::int64_t false_negative = 0;
  std::optional<double> precision;
  std::optional<double> recall;
};

DetectionCounts detection_stats(std::int64_t tp, std::int64_t fp, std::int64_t fn);

// --- cohort manifest -----------------------------------------------------------

enum class TreatmentKind { Surgery, Radiotherapy };

struct Treatment {
  double age = 0.0;
  TreatmentKind kind = TreatmentKind::Surgery;
};

struct ScanEntry {
  std::filesystem::path mask;
  double age = 0.0;
  /// Maps this scan's world coordinates onto the previous scan's world coordinates.
  std::optional<AffineTransform> transform_to_previous;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<ScanEntry> scans;
  std::vector<Treatment> treatments;
};

struct CohortManifest {
  std::vector<PatientRecord> patients;
};

/// Schema violation; `json_path()` names the offending field, e.g. "/patients/0/scans/1/age_at_scan".
class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::string json_path, const std::string& message)
      : std::runtime_error(json_path + ": " + message), path_(std::move(json_path)) {}
  const std::string& json_path() const { return path_; }

 private:
  std::string path_;
};

/// Relative mask paths are resolved against `base_dir`.
CohortManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir = {});
CohortManifest load_manifest(const std::filesystem::path& path);

// --- time series ---------------------------------------------------------------

enum class AnomalyKind { BigIncrease, BigDecrease };

const char* to_string(AnomalyKind kind);

struct AnomalyFlag {
  std::size_t index = 0;  // sample compared with its predecessor
  AnomalyKind kind = AnomalyKind::BigIncrease;
  double relative_change = 0.0;
};

struct VolumeSample {
  double age = 0.0;
  double volume_cc = 0.0;
};

struct TumorTimeSeries {
  int tumor_id = 0;
  std::vector<VolumeSample> samples;
  std::vector<AnomalyFlag> flags;
  std::optional<double> censored_from;
};

struct LoadedScan {
  LabelVolume mask;
  double age = 0.0;
  std::optional<AffineTransform> transform_to_previous;
};

struct TrackingOptions {
  double min_volume_cc = kDefaultMinComponentCc;
  double link_dice = 0.1;
  Connectivity connectivity = Connectivity::TwentySix;
};

/// One candidate correspondence between consecutive scans, kept for audit.
struct LinkAudit {
  std::size_t scan_index = 0;  // index of the later scan
  int earlier_id = 0;
  int later_id = 0;
  double dice = 0.0;
  bool selected = false;
};

struct TrackingResult {
  std::vector<TumorTimeSeries> series;
  std::vector<LinkAudit> audit;
};

/// Later scans are resampled onto the earlier grid only to establish correspondence; recorded
/// volumes always come from each scan's native grid. Matching is greedy one-to-one in descending
/// Dice order (ties: smaller later id, then smaller earlier id) with Dice >= link_dice.
TrackingResult track_tumors(std::span<const LoadedScan> scans, const TrackingOptions& options = {});

/// Loads the patient's masks and runs track_tumors.
TrackingResult track_patient(const PatientRecord& patient, const TrackingOptions& options = {});

inline constexpr double kDefaultUpThreshold = 0.5;
inline constexpr double kDefaultDownThreshold = 0.3;

/// Recomputes the flags from scratch; samples are never removed.
TumorTimeSeries flag_anomalies(TumorTimeSeries series, double up_threshold = kDefaultUpThreshold,
                               double down_threshold = kDefaultDownThreshold);

/// Drops samples taken after the earliest treatment and records that age in censored_from.
TumorTimeSeries censor_after_treatment(TumorTimeSeries series, std::span<const Treatment> treatments);

/// Minimum number of samples for a series to enter growth fitting.
inline constexpr std::size_t kMinSamplesForFit = 3;

}  // namespace pgx
