#include "detangle/synth.hpp"

#include <cmath>
#include <numeric>

namespace detangle {

namespace {

std::size_t draw(Rng& rng, const std::vector<double>& weights) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    acc += weights[k];
    last = k;
    if (u < acc) return k;
  }
  return last;
}

std::vector<double> mixing_weights(const Representation& rep, const SynthesisSpec& spec) {
  const std::vector<double>& w = spec.mixing.empty() ? rep.subset_mass : spec.mixing;
  if (w.size() != rep.subset_count())
    throw ValidationError("mixing weights have " + std::to_string(w.size()) + " entries, representation has " +
                          std::to_string(rep.subset_count()) + " subsets");
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("mixing weights must be finite and >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("mixing weights must sum to one");
  return w;
}

Eigen::RowVectorXd sample_row(const Representation& rep, std::size_t l, Rng& rng) {
  Eigen::RowVectorXd z(static_cast<Eigen::Index>(rep.latent_count()));
  for (std::size_t t = 0; t < rep.latent_count(); ++t)
    z(static_cast<Eigen::Index>(t)) = sample_estimate(rep.estimates[t][l], rng);
  return z;
}

}  // namespace

double sample_estimate(const DistEstimate& e, Rng& rng) {
  if (const auto* g = std::get_if<GaussianParams>(&e.params)) return g->mean + std::sqrt(g->variance) * rng.normal();
  if (const auto* g = std::get_if<GmmParams>(&e.params)) {
    const std::size_t c = draw(rng, g->weights);
    return g->means[c] + std::sqrt(g->variances[c]) * rng.normal();
  }
  const auto& k = std::get<KdeParams>(e.params);
  const std::size_t i = draw(rng, k.weights);
  return k.points[i] + k.bandwidth * rng.normal();
}

LatentSample sample_latents(const Representation& rep, const SynthesisSpec& spec) {
  if (rep.latent_count() == 0) throw ValidationError("representation has no latents");
  for (const auto& row : rep.estimates) {
    if (row.size() != rep.subset_count()) throw ValidationError("representation subset counts differ across latents");
    for (const auto& e : row) validate_estimate(e);
  }
  const auto weights = mixing_weights(rep, spec);
  Rng rng(spec.seed);
  LatentSample out;
  out.latents.resize(static_cast<Eigen::Index>(spec.count), static_cast<Eigen::Index>(rep.latent_count()));
  out.subsets.resize(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    out.subsets[i] = draw(rng, weights);
    out.latents.row(static_cast<Eigen::Index>(i)) = sample_row(rep, out.subsets[i], rng);
  }
  return out;
}

Dataset synthesize(const DataModel& model, const Representation& rep, const SynthesisSpec& spec) {
  validate_representation(rep, model);
  if (spec.max_resamples < 1) throw ValidationError("max_resamples must be >= 1");
  if (model.grouping && model.subset_categories.size() != rep.subset_count())
    throw ValidationError("grouping categories do not match the representation's subsets");
  const LatentSample sample = sample_latents(rep, spec);
  // Resampling draws from its own stream so the clamp and reject policies
  // share the initial sample.
  Rng resample(derive_seed(spec.seed, "resample"));
  Eigen::MatrixXd cells(static_cast<Eigen::Index>(spec.count), static_cast<Eigen::Index>(model.schema.size()));
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::size_t l = sample.subsets[i];
    std::map<std::size_t, double> overrides;
    if (model.grouping) overrides[*model.grouping] = model.subset_categories[l];
    DecodeResult r = decode_latent(model, sample.latents.row(static_cast<Eigen::Index>(i)).transpose(), overrides);
    if (spec.policy == ValidityPolicy::kReject) {
      int attempts = 0;
      while (r.clamped) {
        if (++attempts > spec.max_resamples)
          throw NumericError("synthetic row " + std::to_string(i) + " still out of domain after " +
                             std::to_string(spec.max_resamples) + " resamples");
        r = decode_latent(model, sample_row(rep, l, resample).transpose(), overrides);
      }
    }
    cells.row(static_cast<Eigen::Index>(i)) = r.record;
  }
  return Dataset(model.schema, std::move(cells));
}

ConditionalSynthesis conditional_synthesize(const DataModel& model, const Representation& rep,
                                            const Dataset& extracted, const ExtrapolationQuery& p,
                                            const SynthesisSpec& spec) {
  ConditionalSynthesis out;
  out.extrapolated = extrapolate(model, rep, extracted, p);
  SynthesisSpec s = spec;
  s.mixing.clear();
  out.data = synthesize(model, out.extrapolated.representation, s);
  return out;
}

}  // namespace detangle
