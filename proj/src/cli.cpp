#include "pgx/cli.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "pgx/csv.hpp"
#include "pgx/io_util.hpp"
#include "pgx/metrics.hpp"
#include "pgx/stats.hpp"

namespace pgx::cli {

namespace {

using nlohmann::json;

/// Bad user input detected by a command itself.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int guarded(std::ostream& err, const char* command, const std::function<void()>& body) {
  try {
    body();
    return kSuccess;
  } catch (const ManifestError& e) {
    err << "pgx " << command << ": manifest error at " << (e.json_path().empty() ? "/" : e.json_path())
        << ": " << e.what() << '\n';
    return kInputError;
  } catch (const InputError& e) {
    err << "pgx " << command << ": " << e.what() << '\n';
    return kInputError;
  } catch (const InvalidArgument& e) {
    err << "pgx " << command << ": " << e.what() << '\n';
    return kInputError;
  } catch (const NiftiError& e) {
    err << "pgx " << command << ": " << e.what() << '\n';
    return kInputError;
  } catch (const CsvError& e) {
    err << "pgx " << command << ": " << e.what() << '\n';
    return kInputError;
  } catch (const IoError& e) {
    err << "pgx " << command << ": " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "pgx " << command << ": internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

/// Runs body(i) for i in [0, n) on the worker pool; rethrows the lowest-index failure.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(worker_threads(), n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

json component_json(const TumorComponent& c) {
  return {{"id", c.id},
          {"voxel_count", c.voxel_count()},
          {"volume_cc", c.volume_cc},
          {"centroid", {c.centroid.x, c.centroid.y, c.centroid.z}}};
}

void require_same_grid(const LabelVolume& a, const char* a_name, const LabelVolume& b, const char* b_name) {
  if (!a.geometry().same_grid(b.geometry())) {
    throw InputError(std::string("grid mismatch: ") + a_name + " " + a.geometry().describe() + " vs " +
                     b_name + " " + b.geometry().describe());
  }
}

VoxelSet nonzero_voxels(const LabelVolume& vol) {
  VoxelSet out;
  const auto v = vol.voxels();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0) out.push_back(vol.dims().index(i));
  }
  return out;
}

}  // namespace

std::filesystem::path links_path_for(const std::filesystem::path& metrics_csv) {
  auto p = metrics_csv;
  return p.replace_extension(".links.json");
}

std::filesystem::path report_path_for(const std::filesystem::path& fits_json) {
  auto p = fits_json;
  return p.replace_extension(".report.csv");
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t job_index) {
  // splitmix64 finalizer over a Weyl step
  std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ULL * (job_index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// --- evaluate ----------------------------------------------------------------------

int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, "evaluate", [&] {
    const LabelVolume ref = read_nifti_file(opt.ref);
    const LabelVolume pred = read_nifti_file(opt.pred);
    require_same_grid(ref, "ref", pred, "pred");
    std::vector<std::uint8_t> vessel_mask;
    if (opt.vessels) {
      const LabelVolume vessels = read_nifti_file(*opt.vessels);
      require_same_grid(ref, "ref", vessels, "vessels");
      vessel_mask.assign(vessels.voxels().begin(), vessels.voxels().end());
    }
    const Connectivity conn = connectivity_from_int(opt.connectivity);

    // Linking always uses the unsubtracted reference; metrics use reference minus vessels.
    const ScanLink link = link_pred_to_ref(pred, ref, opt.min_cc, conn);
    const double voxel_cc = voxel_volume_cc(ref.spacing());

    std::map<int, std::vector<int>> preds_of_ref;
    for (const auto& [p, r] : link.result.matches) preds_of_ref[r].push_back(p);

    std::ostringstream csv;
    csv << "tumor_id,dice,hd95_mm,asd_mm,vol_diff_pct\n";
    json tumors = json::array();
    json skipped = json::array();
    for (const auto& r : link.references) {
      auto it = preds_of_ref.find(r.id);
      if (it == preds_of_ref.end()) continue;
      MaskPair pair{{}, {}, ref.dims(), ref.spacing()};
      for (const auto& v : r.voxels) {
        if (vessel_mask.empty() || vessel_mask[ref.dims().linear(v)] == 0) pair.reference.push_back(v);
      }
      for (int pid : it->second) {
        const auto& pc = link.predictions[static_cast<std::size_t>(pid - 1)];
        pair.prediction.insert(pair.prediction.end(), pc.voxels.begin(), pc.voxels.end());
      }
      normalize(pair.prediction);
      if (pair.reference.empty()) {
        err << "pgx evaluate: reference tumor " << r.id << " is empty after vessel subtraction; skipped\n";
        skipped.push_back(r.id);
        continue;
      }
      const double d = dice(pair);
      const SurfaceDistanceSet sd = surface_distances(pair);
      const double hd = hausdorff95(sd);
      const double asd = avg_surface_distance(sd);
      const double ref_cc = static_cast<double>(pair.reference.size()) * voxel_cc;
      const double pred_cc = static_cast<double>(pair.prediction.size()) * voxel_cc;
      const double vd = relative_volume_error(ref_cc, pred_cc);
      csv << r.id << ',' << format_double(d) << ',' << format_double(hd) << ',' << format_double(asd) << ','
          << format_double(vd) << '\n';
      tumors.push_back({{"tumor_id", r.id},
                        {"predictions", it->second},
                        {"dice", d},
                        {"hd95_mm", hd},
                        {"asd_mm", asd},
                        {"vol_diff_pct", vd},
                        {"ref_cc", ref_cc},
                        {"pred_cc", pred_cc}});
    }

    json matches = json::array();
    for (const auto& [p, r] : link.result.matches) matches.push_back({{"prediction", p}, {"reference", r}});
    json discarded = json::array();
    for (int id : link.result.discarded_predictions) {
      discarded.push_back(component_json(link.predictions[static_cast<std::size_t>(id - 1)]));
    }
    json predictions = json::array();
    for (const auto& c : link.predictions) predictions.push_back(component_json(c));
    json references = json::array();
    for (const auto& c : link.references) references.push_back(component_json(c));

    const json summary = {{"min_cc", opt.min_cc},
                          {"connectivity", opt.connectivity},
                          {"vessels_subtracted", opt.vessels.has_value()},
                          {"matches", matches},
                          {"unmatched_predictions", link.result.unmatched_predictions},
                          {"unmatched_references", link.result.unmatched_references},
                          {"discarded_predictions", discarded},
                          {"skipped_references", skipped},
                          {"predictions", predictions},
                          {"references", references},
                          {"tumors", tumors}};
    write_file_atomic(opt.out, csv.str());
    write_file_atomic(links_path_for(opt.out), summary.dump(2) + "\n");
    out << "evaluate: " << tumors.size() << " linked tumors, " << link.result.unmatched_predictions.size()
        << " unmatched predictions, " << link.result.unmatched_references.size() << " unmatched references, "
        << link.result.discarded_predictions.size() << " discarded predictions\n";
  });
}

// --- track -------------------------------------------------------------------------

int cmd_track(const TrackOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, "track", [&] {
    const CohortManifest manifest = load_manifest(opt.manifest);
    TrackingOptions topt;
    topt.min_volume_cc = opt.min_cc;
    topt.connectivity = connectivity_from_int(opt.connectivity);

    struct PatientOutput {
      std::vector<TumorTimeSeries> tracked;
      std::vector<TumorTimeSeries> eligible;
    };
    std::vector<PatientOutput> results(manifest.patients.size());
    parallel_for(manifest.patients.size(), [&](std::size_t i) {
      const auto& patient = manifest.patients[i];
      TrackingResult tr = track_patient(patient, topt);
      for (auto& s : tr.series) {
        TumorTimeSeries processed = flag_anomalies(censor_after_treatment(std::move(s), patient.treatments));
        if (processed.samples.size() >= kMinSamplesForFit) results[i].eligible.push_back(processed);
        results[i].tracked.push_back(std::move(processed));
      }
    });

    std::ostringstream csv;
    csv << "patient_id,tumor_id,age_years,volume_cc,flags,censored\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& patient = manifest.patients[i];
      std::size_t flagged = 0;
      for (const auto& s : results[i].eligible) {
        if (!s.flags.empty()) ++flagged;
        const std::string censored = s.censored_from ? format_double(*s.censored_from) : "";
        for (std::size_t k = 0; k < s.samples.size(); ++k) {
          std::string flags;
          for (const auto& f : s.flags) {
            if (f.index != k) continue;
            if (!flags.empty()) flags += ';';
            flags += to_string(f.kind);
          }
          csv << csv_escape(patient.patient_id) << ',' << s.tumor_id << ',' << format_double(s.samples[k].age)
              << ',' << format_double(s.samples[k].volume_cc) << ',' << flags << ',' << censored << '\n';
        }
      }
      out << "patient " << patient.patient_id << ": " << results[i].tracked.size() << " tracked, "
          << results[i].eligible.size() << " with >= " << kMinSamplesForFit << " samples (written), " << flagged
          << " flagged\n";
    }
    write_file_atomic(opt.out, csv.str());
  });
}

// --- fit ---------------------------------------------------------------------------

int cmd_fit(const FitOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, "fit", [&] {
    const std::vector<GrowthModelKind> models = parse_model_selector(opt.models);
    const CsvTable table = CsvTable::parse(read_file_text(opt.series));
    const std::size_t c_patient = table.column("patient_id");
    const std::size_t c_tumor = table.column("tumor_id");
    const std::size_t c_age = table.column("age_years");
    const std::size_t c_volume = table.column("volume_cc");

    struct Tumor {
      std::string patient_id;
      std::string tumor_id;
      std::vector<VolumeSample> samples;
    };
    std::vector<Tumor> tumors;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const auto key = std::make_pair(table.at(r, c_patient), table.at(r, c_tumor));
      auto [it, inserted] = index.try_emplace(key, tumors.size());
      if (inserted) tumors.push_back({key.first, key.second, {}});
      const double volume = table.number(r, c_volume);
      if (!(volume > 0.0)) throw InputError("line " + std::to_string(r + 2) + ": volume_cc must be positive");
      tumors[it->second].samples.push_back({table.number(r, c_age), volume});
    }

    std::vector<const Tumor*> eligible;
    std::size_t skipped = 0;
    for (auto& t : tumors) {
      std::sort(t.samples.begin(), t.samples.end(), [](const auto& a, const auto& b) { return a.age < b.age; });
      for (std::size_t k = 1; k < t.samples.size(); ++k) {
        if (t.samples[k].age == t.samples[k - 1].age) {
          throw InputError("patient " + t.patient_id + " tumor " + t.tumor_id + ": duplicate age " +
                           format_double(t.samples[k].age));
        }
      }
      if (t.samples.size() < kMinSamplesForFit) {
        err << "pgx fit: warning: patient " << t.patient_id << " tumor " << t.tumor_id << " has "
            << t.samples.size() << " samples (< " << kMinSamplesForFit << "); skipped\n";
        ++skipped;
        continue;
      }
      eligible.push_back(&t);
    }

    const FitConstraints constraints;
    const std::size_t jobs = eligible.size() * models.size();
    std::vector<GrowthFit> fits(jobs);
    parallel_for(jobs, [&](std::size_t j) {
      OptimizerConfig config;
      config.max_evaluations = opt.budget_evals;
      config.time_budget_seconds = opt.budget_seconds;
      config.seed = derive_seed(opt.seed, j);
      fits[j] = fit_model(eligible[j / models.size()]->samples, models[j % models.size()], constraints, config);
    });

    json fits_json = json::array();
    for (std::size_t j = 0; j < jobs; ++j) {
      const Tumor& t = *eligible[j / models.size()];
      const GrowthFit& f = fits[j];
      json params = {{"v0", f.params.v0}, {"alpha", f.params.alpha}};
      if (f.params.k) params["k"] = *f.params.k;
      if (f.params.b) params["b"] = *f.params.b;
      fits_json.push_back({{"patient_id", t.patient_id},
                           {"tumor_id", t.tumor_id},
                           {"kind", std::string(to_string(f.kind))},
                           {"params", params},
                           {"rmse", f.rmse},
                           {"v_at_100", f.v_at_100},
                           {"violation", f.constraint_violation},
                           {"feasible", f.feasible()},
                           {"evaluations", f.evaluations_used},
                           {"seed", f.seed},
                           {"samples", t.samples.size()}});
    }
    const json doc = {{"constraints",
                       {{"v0_max", constraints.v0_max},
                        {"v_at_100_max", constraints.v_at_100_max},
                        {"plausibility_threshold", constraints.plausibility_threshold}}},
                      {"base_seed", opt.seed},
                      {"budget_evals", opt.budget_evals},
                      {"fits", fits_json}};
    const auto report = aggregate_report(fits, constraints);
    write_file_atomic(opt.out, doc.dump(2) + "\n");
    write_file_atomic(report_path_for(opt.out), report_to_csv(report));
    out << "fit: " << eligible.size() << " tumors x " << models.size() << " models, " << skipped
        << " tumors skipped\n";
  });
}

// --- observer-stats ----------------------------------------------------------------

int cmd_observer_stats(const ObserverStatsOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, "observer-stats", [&] {
    const CsvTable table = CsvTable::parse(read_file_text(opt.pairs));
    const std::size_t c_cmp = table.column("comparison");
    const std::size_t c_a = table.column("a");
    const std::size_t c_b = table.column("b");
    if (table.rows() == 0) throw InputError("no pairs in " + opt.pairs.string());

    std::vector<std::string> names;
    std::map<std::string, std::vector<std::pair<double, double>>> groups;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const std::string& name = table.at(r, c_cmp);
      if (!groups.contains(name)) names.push_back(name);
      groups[name].emplace_back(table.number(r, c_a), table.number(r, c_b));
    }
    std::vector<WilcoxonResult> results;
    std::vector<double> p_values;
    for (const auto& name : names) {
      results.push_back(wilcoxon_signed_rank(groups[name]));
      p_values.push_back(results.back().p_two_sided);
    }
    const std::vector<bool> reject = holm_correction(p_values, opt.alpha);

    std::ostringstream csv;
    csv << "comparison,n_pairs,n_effective,w,w_plus,w_minus,p_value,exact,reject\n";
    std::size_t rejected = 0;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto& r = results[i];
      rejected += reject[i] ? 1 : 0;
      csv << csv_escape(names[i]) << ',' << groups[names[i]].size() << ',' << r.n_effective << ','
          << format_double(r.w) << ',' << format_double(r.w_plus) << ',' << format_double(r.w_minus) << ','
          << format_double(r.p_two_sided) << ',' << (r.exact ? "true" : "false") << ','
          << (reject[i] ? "true" : "false") << '\n';
    }
    write_file_atomic(opt.out, csv.str());
    out << "observer-stats: " << names.size() << " comparisons, " << rejected << " rejected at alpha "
        << format_double(opt.alpha) << " (Holm)\n";
  });
}

// --- distance-map ------------------------------------------------------------------

int cmd_distance_map(const DistanceMapOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, "distance-map", [&] {
    const LabelVolume first = read_nifti_file(opt.ref);
    const LabelVolume second = read_nifti_file(opt.pred);
    require_same_grid(first, "ref", second, "pred");
    const MaskPair pair{nonzero_voxels(first), nonzero_voxels(second), first.dims(), first.spacing()};
    const auto map = distance_map(pair);
    std::ostringstream csv;
    csv << "x,y,z,distance_mm\n";
    for (const auto& d : map) {
      csv << d.voxel.x << ',' << d.voxel.y << ',' << d.voxel.z << ',' << format_double(d.mm) << '\n';
    }
    write_file_atomic(opt.out, csv.str());
    out << "distance-map: " << map.size() << " surface voxels\n";
  });
}

// --- argument parsing --------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-processing, evaluation, tracking and growth-curve fitting for tumour segmentations", "pgx"};
  app.require_subcommand(1);

  EvaluateOptions ev;
  std::string vessels;
  auto* evaluate = app.add_subcommand("evaluate", "Link prediction to reference components and write per-tumor metrics");
  evaluate->add_option("--ref", ev.ref, "Reference mask (NIfTI-1), vessels not subtracted")->required();
  evaluate->add_option("--pred", ev.pred, "Predicted mask (NIfTI-1)")->required();
  evaluate->add_option("--vessels", vessels, "Vessel mask subtracted from the reference for metrics");
  evaluate->add_option("--min-cc", ev.min_cc, "Discard predicted components below this volume (cc)")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  evaluate->add_option("--connectivity", ev.connectivity, "Component connectivity (6, 18 or 26)")
      ->capture_default_str()->check(CLI::IsMember({6, 18, 26}));
  evaluate->add_option("--out", ev.out, "Metrics CSV; link summary written next to it as <stem>.links.json")->required();

  TrackOptions tr;
  auto* track = app.add_subcommand("track", "Track tumors over time for every patient in a cohort manifest");
  track->add_option("--manifest", tr.manifest, "Cohort manifest (JSON)")->required();
  track->add_option("--min-cc", tr.min_cc, "Ignore components below this volume (cc)")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  track->add_option("--connectivity", tr.connectivity, "Component connectivity (6, 18 or 26)")
      ->capture_default_str()->check(CLI::IsMember({6, 18, 26}));
  track->add_option("--out", tr.out, "Series CSV")->required();

  FitOptions fi;
  auto* fit = app.add_subcommand("fit", "Fit growth curves to tracked tumor volumes");
  fit->add_option("--series", fi.series, "Series CSV (patient_id, tumor_id, age_years, volume_cc)")->required();
  fit->add_option("--models", fi.models, "Comma-separated models or 'all'")->capture_default_str();
  fit->add_option("--budget-evals", fi.budget_evals, "Evaluations per optimization run")->capture_default_str();
  fit->add_option("--budget-seconds", fi.budget_seconds, "Wall-clock cap per optimization run")->capture_default_str();
  fit->add_option("--seed", fi.seed, "Base random seed")->capture_default_str();
  fit->add_option("--out", fi.out, "Fits JSON; report written next to it as <stem>.report.csv")->required();

  ObserverStatsOptions ob;
  auto* observer = app.add_subcommand("observer-stats", "Wilcoxon signed-rank tests with Holm correction");
  observer->add_option("--pairs", ob.pairs, "Paired CSV (comparison, item, a, b)")->required();
  observer->add_option("--alpha", ob.alpha, "Family-wise significance level")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  observer->add_option("--out", ob.out, "Output CSV")->required();

  DistanceMapOptions dm;
  auto* dmap = app.add_subcommand("distance-map", "Signed closest-surface distances of --pred relative to --ref");
  dmap->add_option("--ref", dm.ref, "First (earlier) mask")->required();
  dmap->add_option("--pred", dm.pred, "Second (later) mask")->required();
  dmap->add_option("--out", dm.out, "Output CSV (x, y, z, distance_mm)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    // subcommand --help surfaces as CallForHelp from the subcommand
    err << "pgx: " << e.what() << '\n';
    return kInputError;
  }

  if (*evaluate) {
    if (!vessels.empty()) ev.vessels = vessels;
    return cmd_evaluate(ev, out, err);
  }
  if (*track) return cmd_track(tr, out, err);
  if (*fit) return cmd_fit(fi, out, err);
  if (*observer) return cmd_observer_stats(ob, out, err);
  if (*dmap) return cmd_distance_map(dm, out, err);
  return kInputError;
}

}  // namespace pgx::cli
