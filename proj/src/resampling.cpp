#include "translate/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "translate/errors.hpp"
#include "translate/parallel.hpp"
#include "translate/rng.hpp"

namespace translate {

namespace {

struct Quantity {
  std::string name;
  std::string method;
  std::string feature;
};

std::string grid_text(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Every tracked value for one dataset, in quantity order.
std::vector<double> evaluate_all(const Dataset& ds, const BootstrapConfig& cfg,
                                 const std::vector<std::shared_ptr<const CohortProbabilityModel>>& fixed,
                                 std::vector<Quantity>* names) {
  std::vector<double> out;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    const auto& mc = cfg.methods[m];
    const auto result = compute_weights(ds, mc, fixed.empty() ? nullptr : fixed[m]);
    const std::string tag = to_string(mc.method);
    for (const auto& f : cfg.features) {
      const auto est = estimate_feature(f, result.weights, ds);
      const std::string label = f.label(ds);
      for (Eigen::Index k = 0; k < est.values.size(); ++k) {
        out.push_back(est.values(k));
        if (names) {
          std::string name = label;
          if (f.kind == FeatureKind::cdf_at) name += "[" + grid_text(f.grid[static_cast<std::size_t>(k)]) + "]";
          names->push_back({tag + "/" + name, tag, name});
        }
      }
    }
    if (cfg.track_ess) {
      out.push_back(result.ess.composite_ess_empirical);
      if (names) names->push_back({tag + "/ess", tag, "ess"});
    }
  }
  return out;
}

std::uint64_t hash_indices(const std::vector<std::size_t>& idx) {
  std::uint64_t h = mix64(idx.size());
  for (const auto i : idx) h = mix64(h ^ (i + 0x9e3779b97f4a7c15ULL));
  return h;
}

std::vector<std::size_t> draw_indices(const Dataset& ds, bool stratified, CounterRng& rng) {
  const auto n = static_cast<std::size_t>(ds.size());
  std::vector<std::size_t> idx(n);
  if (!stratified) {
    for (auto& i : idx) i = rng.below(n);
    return idx;
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(ds.num_cohorts()));
  const auto labels = ds.labels();
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  std::size_t k = 0;
  for (const auto& group : members) {
    for (std::size_t j = 0; j < group.size(); ++j) idx[k++] = group[rng.below(group.size())];
  }
  return idx;
}

bool redrawable(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const SupportError&) {
    return true;
  } catch (const SubgroupSupportError&) {
    return true;
  } catch (const SingularityError&) {
    return true;
  } catch (const InsufficientDataError&) {
    return true;
  } catch (const RankDeficiencyError&) {
    return true;
  } catch (const DegenerateWeightsError&) {
    return true;
  } catch (const DegenerateVarianceError&) {
    return true;
  } catch (const SpecError&) {
    // Only reachable once the full-data run has validated the specs, so it
    // means a subgroup vanished from this resample.
    return true;
  } catch (...) {
    return false;
  }
}

std::size_t order_index(double pos, std::size_t b) {
  // ceil with a guard against products like 200 * 0.975 landing just above
  // an integer.
  const double c = std::ceil(pos - 1e-9);
  const auto k = static_cast<std::size_t>(std::max(1.0, c));
  return std::min(k, b) - 1;
}

}  // namespace

const BootstrapResult& BootstrapRun::find(const std::string& quantity) const {
  for (const auto& r : results) {
    if (r.quantity == quantity) return r;
  }
  throw SpecError("no bootstrap quantity named '" + quantity + "'");
}

void summarize_replicates(BootstrapResult& r) {
  const auto b = static_cast<std::size_t>(r.replicate_values.size());
  if (b < 2) throw DomainError("bootstrap needs at least two replicates");
  const double mean = r.replicate_values.mean();
  const double ss = (r.replicate_values.array() - mean).square().sum();
  r.se = std::sqrt(ss / static_cast<double>(b - 1));
  std::vector<double> sorted(r.replicate_values.data(), r.replicate_values.data() + b);
  std::sort(sorted.begin(), sorted.end());
  r.ci_low = sorted[order_index(static_cast<double>(b) * r.alpha / 2.0, b)];
  r.ci_high = sorted[order_index(static_cast<double>(b) * (1.0 - r.alpha / 2.0), b)];
  r.significant = r.ci_low > 0.0 || r.ci_high < 0.0;
}

BootstrapRun bootstrap_pipeline(const Dataset& ds, const BootstrapConfig& cfg, std::size_t B, std::uint64_t seed,
                                double alpha, unsigned threads) {
  if (B < 2) throw DomainError("bootstrap needs B >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (cfg.methods.empty()) throw SpecError("bootstrap needs at least one weighting method");
  for (const auto& f : cfg.features) validate_spec(f, ds);

  // Full-data pass: point estimates, quantity names and (for the fast path)
  // the fitted models.
  std::vector<std::shared_ptr<const CohortProbabilityModel>> fixed;
  if (!cfg.refit) {
    for (const auto& mc : cfg.methods) fixed.push_back(compute_weights(ds, mc).model);
  }
  std::vector<Quantity> names;
  const std::vector<double> point = evaluate_all(ds, cfg, fixed, &names);
  const std::size_t nq = names.size();

  Eigen::MatrixXd values(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(nq));
  std::vector<std::uint64_t> hashes(B);
  std::vector<std::size_t> redraws(B, 0);

  parallel_for(B, threads, [&](std::size_t r) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= cfg.max_attempts) {
        throw SupportError("bootstrap replicate " + std::to_string(r) + " failed after " +
                           std::to_string(cfg.max_attempts) + " redraws");
      }
      CounterRng rng(seed, r, static_cast<std::uint64_t>(attempt));
      const auto idx = draw_indices(ds, cfg.stratified, rng);
      try {
        const auto v = evaluate_all(ds.subset(idx), cfg, fixed, nullptr);
        for (std::size_t q = 0; q < nq; ++q) values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) = v[q];
        hashes[r] = hash_indices(idx);
        redraws[r] = static_cast<std::size_t>(attempt);
        return;
      } catch (...) {
        if (!redrawable(std::current_exception())) throw;
      }
    }
  });

  BootstrapRun run;
  run.B = B;
  run.seed = seed;
  run.alpha = alpha;
  run.replicate_hashes = hashes;
  for (const auto c : redraws) run.redraw_count += c;
  std::uint64_t provenance = mix64(seed ^ mix64(B));
  for (const auto h : hashes) provenance = mix64(provenance ^ h);
  if (static_cast<double>(run.redraw_count) > 0.1 * static_cast<double>(B)) {
    run.warnings.push_back(std::to_string(run.redraw_count) + " replicate redraws exceed 10% of B = " +
                           std::to_string(B));
  }

  for (std::size_t q = 0; q < nq; ++q) {
    BootstrapResult res;
    res.quantity = names[q].name;
    res.method = names[q].method;
    res.feature = names[q].feature;
    res.point_estimate = point[q];
    res.replicate_values = values.col(static_cast<Eigen::Index>(q));
    res.alpha = alpha;
    res.seed = seed;
    res.redraw_count = run.redraw_count;
    res.provenance = provenance;
    summarize_replicates(res);
    run.results.push_back(std::move(res));
  }
  return run;
}

BootstrapResult paired_difference(const BootstrapResult& a, const BootstrapResult& b) {
  if (a.B() != b.B()) throw PairingError("paired difference needs equal replicate counts");
  if (a.seed != b.seed || a.provenance != b.provenance) {
    throw PairingError("paired difference needs results from the same resample stream");
  }
  if (a.alpha != b.alpha) throw PairingError("paired difference needs a common alpha");
  BootstrapResult d;
  d.quantity = a.quantity + " - " + b.quantity;
  d.method = a.method == b.method ? a.method : a.method + "-" + b.method;
  d.feature = a.feature == b.feature ? a.feature : a.feature + "-" + b.feature;
  d.point_estimate = a.point_estimate - b.point_estimate;
  d.replicate_values = a.replicate_values - b.replicate_values;
  d.alpha = a.alpha;
  d.seed = a.seed;
  d.redraw_count = a.redraw_count;
  d.provenance = a.provenance;
  summarize_replicates(d);
  return d;
}

nlohmann::json to_json(const BootstrapResult& r) {
  return nlohmann::json{{"quantity", r.quantity},   {"method", r.method},     {"feature", r.feature},
                        {"estimate", r.point_estimate}, {"se", r.se},          {"ci_low", r.ci_low},
                        {"ci_high", r.ci_high},     {"alpha", r.alpha},       {"significant", r.significant},
                        {"B", r.B()},               {"seed", r.seed},         {"redraw_count", r.redraw_count}};
}

nlohmann::json to_json(const BootstrapConfig& cfg, const Dataset& ds) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : cfg.methods) methods.push_back(to_json(m));
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : cfg.features) features.push_back(f.label(ds));
  return nlohmann::json{{"methods", methods},     {"features", features},
                        {"track_ess", cfg.track_ess}, {"stratified", cfg.stratified},
                        {"refit", cfg.refit}};
}

}  // namespace translate
