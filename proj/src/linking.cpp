#include "pgx/linking.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"
#include "pgx/io_util.hpp"

namespace pgx {

ScanLink link_pred_to_ref(const LabelVolume& pred, const LabelVolume& ref_with_vessels,
                          double min_volume_cc, Connectivity conn) {
  if (!pred.geometry().same_grid(ref_with_vessels.geometry())) {
    throw InvalidArgument("grid mismatch: prediction " + pred.geometry().describe() +
                          " vs reference " + ref_with_vessels.geometry().describe());
  }
  ScanLink link;
  link.predictions = connected_components(pred, conn);
  link.references = connected_components(ref_with_vessels, conn);

  const LabelVolume ref_ids = component_label_volume(ref_with_vessels.geometry(), link.references);
  std::vector<bool> ref_hit(link.references.size() + 1, false);

  for (const auto& p : link.predictions) {
    if (!(p.volume_cc >= min_volume_cc)) {
      link.result.discarded_predictions.push_back(p.id);
      continue;
    }
    const int ref_id = ref_ids.dims().contains(p.centroid) ? ref_ids.at(p.centroid) : 0;
    if (ref_id == 0) {
      link.result.unmatched_predictions.push_back(p.id);
    } else {
      link.result.matches.emplace_back(p.id, ref_id);
      ref_hit[static_cast<std::size_t>(ref_id)] = true;
    }
  }
  for (const auto& r : link.references) {
    if (!ref_hit[static_cast<std::size_t>(r.id)]) link.result.unmatched_references.push_back(r.id);
  }
  return link;
}

DetectionCounts detection_stats(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw InvalidArgument("detection counts must be non-negative");
  DetectionCounts d{tp, fp, fn, std::nullopt, std::nullopt};
  if (tp + fp > 0) d.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) d.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return d;
}

// --- manifest ------------------------------------------------------------------

namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ManifestError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ManifestError(path + "/" + key, "missing required field");
  return *it;
}

double require_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ManifestError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ManifestError(path, "expected a finite number");
  return d;
}

double require_age(const json& v, const std::string& path) {
  const double age = require_number(v, path);
  if (age < 0.0 || age > 120.0) throw ManifestError(path, "age must lie in [0, 120] years");
  return age;
}

AffineTransform parse_affine(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 16) throw ManifestError(path, "expected 16 numbers (row-major 4x4)");
  AffineTransform::Matrix m{};
  for (std::size_t i = 0; i < 16; ++i) m[i] = require_number(v[i], path + "/" + std::to_string(i));
  try {
    return AffineTransform(m);
  } catch (const InvalidArgument& e) {
    throw ManifestError(path, e.what());
  }
}

}  // namespace

CohortManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ManifestError("", std::string("invalid JSON: ") + e.what());
  }
  CohortManifest manifest;
  const json& patients = require(doc, "patients", "");
  if (!patients.is_array()) throw ManifestError("/patients", "expected an array");
  for (std::size_t pi = 0; pi < patients.size(); ++pi) {
    const std::string ppath = "/patients/" + std::to_string(pi);
    const json& pj = patients[pi];
    PatientRecord rec;
    const json& id = require(pj, "patient_id", ppath);
    if (id.is_string()) {
      rec.patient_id = id.get<std::string>();
    } else if (id.is_number_integer()) {
      rec.patient_id = std::to_string(id.get<std::int64_t>());
    } else {
      throw ManifestError(ppath + "/patient_id", "expected a string");
    }
    if (rec.patient_id.empty()) throw ManifestError(ppath + "/patient_id", "must not be empty");

    const json& scans = require(pj, "scans", ppath);
    if (!scans.is_array()) throw ManifestError(ppath + "/scans", "expected an array");
    for (std::size_t si = 0; si < scans.size(); ++si) {
      const std::string spath = ppath + "/scans/" + std::to_string(si);
      const json& sj = scans[si];
      ScanEntry scan;
      const json& mask = require(sj, "path", spath);
      if (!mask.is_string()) throw ManifestError(spath + "/path", "expected a string");
      scan.mask = std::filesystem::path(mask.get<std::string>());
      if (scan.mask.is_relative() && !base_dir.empty()) scan.mask = base_dir / scan.mask;
      scan.age = require_age(require(sj, "age_at_scan", spath), spath + "/age_at_scan");
      if (si > 0 && !(scan.age > rec.scans.back().age)) {
        throw ManifestError(spath + "/age_at_scan", "scans must be sorted by strictly ascending age");
      }
      auto t = sj.find("transform_to_previous");
      if (t != sj.end() && !t->is_null()) {
        scan.transform_to_previous = parse_affine(*t, spath + "/transform_to_previous");
      } else if (si > 0) {
        throw ManifestError(spath + "/transform_to_previous", "required for every scan after the first");
      }
      rec.scans.push_back(std::move(scan));
    }

    auto tr = pj.find("treatments");
    if (tr != pj.end() && !tr->is_null()) {
      if (!tr->is_array()) throw ManifestError(ppath + "/treatments", "expected an array");
      for (std::size_t ti = 0; ti < tr->size(); ++ti) {
        const std::string tpath = ppath + "/treatments/" + std::to_string(ti);
        const json& tj = (*tr)[ti];
        Treatment treatment;
        treatment.age = require_age(require(tj, "age", tpath), tpath + "/age");
        const json& kind = require(tj, "kind", tpath);
        const std::string k = kind.is_string() ? kind.get<std::string>() : "";
        if (k == "surgery") {
          treatment.kind = TreatmentKind::Surgery;
        } else if (k == "radiotherapy") {
          treatment.kind = TreatmentKind::Radiotherapy;
        } else {
          throw ManifestError(tpath + "/kind", "expected \"surgery\" or \"radiotherapy\"");
        }
        rec.treatments.push_back(treatment);
      }
    }
    manifest.patients.push_back(std::move(rec));
  }
  return manifest;
}

CohortManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file_text(path), path.parent_path());
}

// --- tracking --------------------------------------------------------------------

const char* to_string(AnomalyKind kind) {
  return kind == AnomalyKind::BigIncrease ? "big_increase" : "big_decrease";
}

TrackingResult track_tumors(std::span<const LoadedScan> scans, const TrackingOptions& options) {
  TrackingResult out;
  if (scans.empty()) return out;
  for (std::size_t i = 1; i < scans.size(); ++i) {
    if (!(scans[i].age > scans[i - 1].age)) throw InvalidArgument("scans must be sorted by strictly ascending age");
    if (!scans[i].transform_to_previous) {
      throw InvalidArgument("missing transform_to_previous for scan " + std::to_string(i));
    }
  }

  auto kept_components = [&](const LabelVolume& mask) {
    return filter_components(connected_components(mask, options.connectivity), options.min_volume_cc).kept;
  };

  std::vector<TumorComponent> previous = kept_components(scans[0].mask);
  std::map<int, std::size_t> series_of;  // component id in previous scan -> series index
  for (const auto& c : previous) {
    series_of[c.id] = out.series.size();
    out.series.push_back({static_cast<int>(out.series.size() + 1), {{scans[0].age, c.volume_cc}}, {}, {}});
  }

  for (std::size_t i = 1; i < scans.size(); ++i) {
    const LabelVolume& earlier_mask = scans[i - 1].mask;
    const LabelVolume& later_mask = scans[i].mask;
    std::vector<TumorComponent> current = kept_components(later_mask);

    // Carry later component ids onto the earlier grid.
    const LabelVolume later_ids = component_label_volume(later_mask.geometry(), current);
    const LabelVolume resampled =
        resample_nearest(later_ids, scans[i].transform_to_previous->inverse(), earlier_mask.geometry());
    const LabelVolume earlier_ids = component_label_volume(earlier_mask.geometry(), previous);

    std::map<int, std::size_t> earlier_size;
    for (const auto& c : previous) earlier_size[c.id] = c.voxel_count();
    std::map<int, std::size_t> later_size;  // resampled footprint
    std::map<std::pair<int, int>, std::size_t> overlap;
    const auto rv = resampled.voxels();
    const auto ev = earlier_ids.voxels();
    for (std::size_t v = 0; v < rv.size(); ++v) {
      if (rv[v] == 0) continue;
      ++later_size[rv[v]];
      if (ev[v] != 0) ++overlap[{ev[v], rv[v]}];
    }

    struct Candidate {
      int earlier_id;
      int later_id;
      double dice;
    };
    std::vector<Candidate> candidates;
    for (const auto& [key, inter] : overlap) {
      const double d = 2.0 * static_cast<double>(inter) /
                       static_cast<double>(earlier_size[key.first] + later_size[key.second]);
      candidates.push_back({key.first, key.second, d});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.dice != b.dice) return a.dice > b.dice;
      if (a.later_id != b.later_id) return a.later_id < b.later_id;
      return a.earlier_id < b.earlier_id;
    });

    std::map<int, int> later_to_earlier;
    std::map<int, bool> earlier_taken;
    for (const auto& c : candidates) {
      const bool ok = c.dice >= options.link_dice && !earlier_taken[c.earlier_id] &&
                      !later_to_earlier.contains(c.later_id);
      if (ok) {
        earlier_taken[c.earlier_id] = true;
        later_to_earlier[c.later_id] = c.earlier_id;
      }
      out.audit.push_back({i, c.earlier_id, c.later_id, c.dice, ok});
    }

    std::map<int, std::size_t> next_series_of;
    for (const auto& c : current) {
      std::size_t s;
      if (auto it = later_to_earlier.find(c.id); it != later_to_earlier.end()) {
        s = series_of.at(it->second);
        out.series[s].samples.push_back({scans[i].age, c.volume_cc});
      } else {
        s = out.series.size();
        out.series.push_back({static_cast<int>(s + 1), {{scans[i].age, c.volume_cc}}, {}, {}});
      }
      next_series_of[c.id] = s;
    }
    series_of = std::move(next_series_of);
    previous = std::move(current);
  }
  return out;
}

TrackingResult track_patient(const PatientRecord& patient, const TrackingOptions& options) {
  std::vector<LoadedScan> scans;
  scans.reserve(patient.scans.size());
  for (const auto& s : patient.scans) {
    scans.push_back({read_nifti_file(s.mask), s.age, s.transform_to_previous});
  }
  return track_tumors(scans, options);
}

TumorTimeSeries flag_anomalies(TumorTimeSeries series, double up_threshold, double down_threshold) {
  if (!(up_threshold > 0.0 && down_threshold > 0.0)) throw InvalidArgument("anomaly thresholds must be positive");
  series.flags.clear();
  for (std::size_t i = 1; i < series.samples.size(); ++i) {
    const double prev = series.samples[i - 1].volume_cc;
    const double change = (series.samples[i].volume_cc - prev) / prev;
    if (change > up_threshold) {
      series.flags.push_back({i, AnomalyKind::BigIncrease, change});
    } else if (change < -down_threshold) {
      series.flags.push_back({i, AnomalyKind::BigDecrease, change});
    }
  }
  return series;
}

TumorTimeSeries censor_after_treatment(TumorTimeSeries series, std::span<const Treatment> treatments) {
  if (treatments.empty()) return series;
  const double first = std::min_element(treatments.begin(), treatments.end(), [](const auto& a, const auto& b) {
                         return a.age < b.age;
                       })->age;
  std::erase_if(series.samples, [first](const VolumeSample& s) { return s.age > first; });
  std::erase_if(series.flags, [&](const AnomalyFlag& f) { return f.index >= series.samples.size(); });
  series.censored_from = first;
  return series;
}

}  // namespace pgx
