#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "parmark/attack.hpp"
#include "parmark/detect.hpp"
#include "parmark/embed.hpp"
#include "parmark/errors.hpp"
#include "parmark/eval.hpp"
#include "parmark/format.hpp"
#include "parmark/generate.hpp"
#include "parmark/greenlist.hpp"
#include "parmark/model.hpp"
#include "parmark/rng.hpp"
#include "parmark/token.hpp"

namespace parmark {

inline constexpr std::string_view kToolName = "parmark";
inline constexpr std::string_view kToolVersion = "0.1.0";

// One sweep point: parameters plus summary statistics over N seeded trials.
struct ExperimentRecord {
  std::string model_id;
  std::string method;  // "unmarked", "multiplicative", "additive"
  SamplerKind sampler_kind = SamplerKind::Temperature;
  double sampler_param = 1.0;
  std::uint64_t master_seed = 0;
  std::uint32_t gen_len = 0;
  std::uint32_t prompt_len = 0;
  double gamma = 0.0;
  double alpha_up = 1.0;
  double alpha_down = 1.0;
  double beta_up = 1.0;
  double beta_down = 1.0;
  double delta = 0.0;
  std::string attack_kind = "none";
  double attack_ratio = 0.0;
  std::uint32_t trials = 0;
  double mean_z = 0.0;
  double std_z = 0.0;
  double detection_rate = 0.0;
  double mean_ppl = 0.0;
  double std_ppl = 0.0;

  bool operator==(const ExperimentRecord&) const = default;
};

// Exactly one parameter axis is swept; everything else is pinned by `base`.
struct SweepPlan {
  std::string model_id = "model";
  SamplerKind sampler_kind = SamplerKind::Temperature;
  double sampler_param = 1.0;
  std::uint64_t master_seed = 42;
  std::uint32_t gen_len = 200;
  std::uint32_t prompt_len = 32;
  std::uint32_t trials = 200;
  WatermarkConfig base;
  std::vector<double> grid;

  void validate() const {
    if (trials < 1) throw ParamError("trials must be at least 1");
    if (gen_len < 1) throw ParamError("gen_len must be at least 1");
    if (grid.empty()) throw ParamError("sweep grid must be nonempty");
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (!(grid[i] > grid[i - 1])) throw ParamError("sweep grid must be strictly increasing");
    }
    if (model_id.find(',') != std::string::npos) {
      throw ParamError("model_id must not contain commas");
    }
  }
};

struct TrialResult {
  DetectionReport detection;
  PplReport ppl;
};

// Per-point raw series, kept for paired statistics across grid points.
struct TrialSeries {
  std::vector<double> z;
  std::vector<double> ppl;
};

namespace seed_purpose {
inline constexpr std::uint64_t kSampler = 1;
inline constexpr std::uint64_t kAttack = 2;
}  // namespace seed_purpose

// Trial seeds are derived, not stored: re-running a plan reproduces every
// trial bit-exactly. The derivation depends on (master, purpose, trial) only,
// never on the grid point, so trials are paired across a sweep's points.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t trial) {
  return splitmix_mix(splitmix_mix(master ^ purpose) ^ trial);
}

// Generates with the marked model, optionally perturbs the continuation,
// detects on the (possibly perturbed) continuation only, and scores its
// perplexity under the unmarked reference model conditioned on the prompt.
inline TrialResult run_trial(const ModelParams& reference, const MarkedModel& marked,
                             const TokenSequence& prompt, std::uint32_t length,
                             const SamplerSpec& sampler,
                             const std::optional<AttackSpec>& attack = std::nullopt) {
  if (reference.vocab_size != marked.params.vocab_size) {
    throw ParamError("reference and marked model vocabularies differ");
  }
  GenerationRequest request{prompt, length, sampler};
  TokenSequence continuation = generate(marked, request);
  if (attack) continuation = apply_attack(continuation, *attack, reference.vocab_size);

  TrialResult result;
  result.detection = detect(continuation, marked.green, marked.config.gamma);
  TokenSequence full = prompt;
  full.insert(full.end(), continuation.begin(), continuation.end());
  result.ppl = perplexity(reference, full, prompt.size());
  return result;
}

namespace detail {

inline SamplerSpec trial_sampler(const SweepPlan& plan, std::uint64_t trial) {
  SamplerSpec s;
  s.kind = plan.sampler_kind;
  s.param = plan.sampler_param;
  s.rng_seed = trial_seed(plan.master_seed, seed_purpose::kSampler, trial);
  return s;
}

template <typename Fn>
auto with_trial_context(std::uint64_t trial, Fn&& fn) {
  try {
    return fn();
  } catch (const FormatError&) {
    throw;
  } catch (const IoError& e) {
    throw IoError("trial " + std::to_string(trial) + ": " + e.what());
  } catch (const ParamError& e) {
    throw ParamError("trial " + std::to_string(trial) + ": " + e.what());
  }
}

}  // namespace detail

// N seeded trials of one configuration; no attack.
inline TrialSeries run_trials(const ModelParams& reference, const MarkedModel& marked,
                              const std::vector<TokenSequence>& prompts, const SweepPlan& plan) {
  if (prompts.empty()) throw ParamError("need at least one prompt");
  TrialSeries series;
  series.z.reserve(plan.trials);
  series.ppl.reserve(plan.trials);
  for (std::uint64_t t = 0; t < plan.trials; ++t) {
    const TrialResult r = detail::with_trial_context(t, [&] {
      return run_trial(reference, marked, prompts[t % prompts.size()], plan.gen_len,
                       detail::trial_sampler(plan, t));
    });
    series.z.push_back(r.detection.z);
    series.ppl.push_back(r.ppl.ppl);
  }
  return series;
}

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

inline Summary summarize(std::span<const double> xs) {
  Summary s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return s;
}

inline double detection_rate(std::span<const double> zs, double threshold = kDefaultZThreshold) {
  if (zs.empty()) return 0.0;
  std::size_t hits = 0;
  for (double z : zs) {
    if (z > threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(zs.size());
}

namespace detail {

inline ExperimentRecord make_record(const SweepPlan& plan, const std::string& method,
                                    const WatermarkConfig& config, const std::string& attack_kind,
                                    double attack_ratio, const TrialSeries& series) {
  ExperimentRecord rec;
  rec.model_id = plan.model_id;
  rec.method = method;
  rec.sampler_kind = plan.sampler_kind;
  rec.sampler_param = plan.sampler_param;
  rec.master_seed = plan.master_seed;
  rec.gen_len = plan.gen_len;
  rec.prompt_len = plan.prompt_len;
  rec.gamma = config.gamma;
  rec.alpha_up = config.alpha_up;
  rec.alpha_down = config.alpha_down;
  rec.beta_up = config.beta_up;
  rec.beta_down = config.beta_down;
  rec.delta = config.delta;
  rec.attack_kind = attack_kind;
  rec.attack_ratio = attack_ratio;
  rec.trials = plan.trials;
  const Summary z = summarize(series.z);
  const Summary ppl = summarize(series.ppl);
  rec.mean_z = z.mean;
  rec.std_z = z.stddev;
  rec.detection_rate = detection_rate(series.z);
  rec.mean_ppl = ppl.mean;
  rec.std_ppl = ppl.stddev;
  return rec;
}

}  // namespace detail

// One record per alpha_up value; gamma and the other factors come from
// plan.base. The 1.0 grid point is the unwatermarked reference.
inline std::vector<ExperimentRecord> sweep_alpha(const ModelParams& model,
                                                 const std::vector<TokenSequence>& prompts,
                                                 const SweepPlan& plan,
                                                 std::vector<TrialSeries>* raw = nullptr) {
  plan.validate();
  if (std::find(plan.grid.begin(), plan.grid.end(), 1.0) == plan.grid.end()) {
    std::cerr << "warning: alpha grid lacks the 1.0 reference point\n";
  }
  std::vector<ExperimentRecord> records;
  for (double alpha : plan.grid) {
    WatermarkConfig config = plan.base;
    config.mode = WatermarkMode::Multiplicative;
    config.alpha_up = alpha;
    const MarkedModel marked = embed_watermark(model, config);
    TrialSeries series = run_trials(model, marked, prompts, plan);
    records.push_back(detail::make_record(plan, "multiplicative", config, "none", 0.0, series));
    if (raw) raw->push_back(std::move(series));
  }
  return records;
}

// One record per gamma value; alpha_up fixed from plan.base.
inline std::vector<ExperimentRecord> sweep_gamma(const ModelParams& model,
                                                 const std::vector<TokenSequence>& prompts,
                                                 const SweepPlan& plan,
                                                 std::vector<TrialSeries>* raw = nullptr) {
  plan.validate();
  std::vector<ExperimentRecord> records;
  for (double gamma : plan.grid) {
    WatermarkConfig config = plan.base;
    config.mode = WatermarkMode::Multiplicative;
    config.gamma = gamma;
    const MarkedModel marked = embed_watermark(model, config);
    TrialSeries series = run_trials(model, marked, prompts, plan);
    records.push_back(detail::make_record(plan, "multiplicative", config, "none", 0.0, series));
    if (raw) raw->push_back(std::move(series));
  }
  return records;
}

// Records per (attack kind, ratio). Each trial generates once and every
// (kind, ratio) cell perturbs that same continuation, so cells are paired and
// the ratio-0 cell reproduces the unattacked reports bit-exactly.
inline std::vector<ExperimentRecord> sweep_attack(const ModelParams& model,
                                                  const std::vector<TokenSequence>& prompts,
                                                  const SweepPlan& plan,
                                                  const std::vector<AttackKind>& kinds,
                                                  std::vector<TrialSeries>* raw = nullptr) {
  plan.validate();
  if (prompts.empty()) throw ParamError("need at least one prompt");
  if (kinds.empty()) throw ParamError("need at least one attack kind");
  if (!(plan.grid.front() == 0.0)) {
    std::cerr << "warning: attack ratio grid lacks the 0 reference point\n";
  }
  const MarkedModel marked = embed_watermark(model, plan.base);

  std::vector<TrialSeries> cells(kinds.size() * plan.grid.size());
  for (std::uint64_t t = 0; t < plan.trials; ++t) {
    detail::with_trial_context(t, [&] {
      const TokenSequence& prompt = prompts[t % prompts.size()];
      GenerationRequest request{prompt, plan.gen_len, detail::trial_sampler(plan, t)};
      const TokenSequence continuation = generate(marked, request);
      const std::uint64_t attack_seed = trial_seed(plan.master_seed, seed_purpose::kAttack, t);
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        for (std::size_t g = 0; g < plan.grid.size(); ++g) {
          const AttackSpec spec{kinds[k], plan.grid[g], attack_seed};
          const TokenSequence attacked = apply_attack(continuation, spec, model.vocab_size);
          const DetectionReport det = detect(attacked, marked.green, marked.config.gamma);
          TokenSequence full = prompt;
          full.insert(full.end(), attacked.begin(), attacked.end());
          const PplReport ppl = perplexity(model, full, prompt.size());
          TrialSeries& cell = cells[k * plan.grid.size() + g];
          cell.z.push_back(det.z);
          cell.ppl.push_back(ppl.ppl);
        }
      }
      return 0;
    });
  }

  std::vector<ExperimentRecord> records;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    for (std::size_t g = 0; g < plan.grid.size(); ++g) {
      TrialSeries& cell = cells[k * plan.grid.size() + g];
      records.push_back(detail::make_record(plan, "multiplicative", plan.base,
                                            attack_kind_name(kinds[k]), plan.grid[g], cell));
      if (raw) raw->push_back(std::move(cell));
    }
  }
  return records;
}

// Three-row method comparison: unmarked baseline, additive baseline with the
// given delta, and the multiplicative config from the plan. The unmarked row
// runs through an identity multiplicative config, which leaves the weights
// bit-identical.
inline std::vector<ExperimentRecord> compare_methods(const ModelParams& model,
                                                     const std::vector<TokenSequence>& prompts,
                                                     const SweepPlan& plan, double delta) {
  plan.validate();
  std::vector<ExperimentRecord> records;

  WatermarkConfig identity = plan.base;
  identity.mode = WatermarkMode::Multiplicative;
  identity.alpha_up = identity.alpha_down = identity.beta_up = identity.beta_down = 1.0;
  {
    const MarkedModel unmarked = embed_watermark(model, identity);
    const TrialSeries series = run_trials(model, unmarked, prompts, plan);
    records.push_back(detail::make_record(plan, "unmarked", identity, "none", 0.0, series));
  }
  {
    WatermarkConfig additive = identity;
    additive.mode = WatermarkMode::AdditiveBaseline;
    additive.delta = delta;
    const MarkedModel marked = mark_model(model, additive);
    const TrialSeries series = run_trials(model, marked, prompts, plan);
    records.push_back(detail::make_record(plan, "additive", additive, "none", 0.0, series));
  }
  {
    WatermarkConfig multiplicative = plan.base;
    multiplicative.mode = WatermarkMode::Multiplicative;
    const MarkedModel marked = embed_watermark(model, multiplicative);
    const TrialSeries series = run_trials(model, marked, prompts, plan);
    records.push_back(detail::make_record(plan, "multiplicative", multiplicative, "none", 0.0, series));
  }
  return records;
}

struct IngestResult {
  TokenSequence corpus;
  std::vector<TokenSequence> prompts;
  std::vector<std::size_t> prompt_offsets;  // byte offset of each prompt
};

// Byte-tokenizes a text file and draws a seeded sample of fixed-length
// prompts at pairwise-disjoint byte offsets.
inline IngestResult ingest_corpus(const std::filesystem::path& path, std::uint32_t prompt_len,
                                  std::uint32_t num_prompts, std::uint64_t seed) {
  const std::string text = read_text_file(path);
  if (text.empty()) throw IoError("corpus is empty: " + path.string());
  if (prompt_len < 1) throw ParamError("prompt_len must be at least 1");

  IngestResult result;
  result.corpus = tokenize_bytes(text);
  if (result.corpus.size() < prompt_len) {
    throw ParamError("corpus shorter than one prompt");
  }

  SplitMix64 rng(seed ^ stream::kPrompts);
  std::vector<std::pair<std::size_t, std::size_t>> taken;  // [start, end)
  const std::size_t max_start = result.corpus.size() - prompt_len;
  std::uint64_t attempts = 0;
  const std::uint64_t attempt_budget = 1000ull * (num_prompts + 1);
  while (result.prompts.size() < num_prompts) {
    if (++attempts > attempt_budget) {
      throw ParamError("corpus too small to sample " + std::to_string(num_prompts) +
                       " disjoint prompts of length " + std::to_string(prompt_len));
    }
    const auto start = static_cast<std::size_t>(rng.next_below(max_start + 1));
    const std::size_t end = start + prompt_len;
    bool overlaps = false;
    for (const auto& [s, e] : taken) {
      if (start < e && s < end) {
        overlaps = true;
        break;
      }
    }
    if (overlaps) continue;
    taken.emplace_back(start, end);
    result.prompt_offsets.push_back(start);
    result.prompts.emplace_back(result.corpus.begin() + static_cast<std::ptrdiff_t>(start),
                                result.corpus.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return result;
}

inline constexpr std::string_view kRecordCsvHeader =
    "model_id,method,sampler,sampler_param,master_seed,gen_len,prompt_len,gamma,"
    "alpha_up,alpha_down,beta_up,beta_down,delta,attack_kind,attack_ratio,trials,"
    "mean_z,std_z,detection_rate,mean_ppl,std_ppl";

inline std::string record_to_csv_row(const ExperimentRecord& r) {
  std::string row;
  row += r.model_id;
  row += ',';
  row += r.method;
  row += ',';
  row += sampler_kind_name(r.sampler_kind);
  row += ',';
  row += double_to_string(r.sampler_param);
  row += ',';
  row += std::to_string(r.master_seed);
  row += ',';
  row += std::to_string(r.gen_len);
  row += ',';
  row += std::to_string(r.prompt_len);
  row += ',';
  row += double_to_string(r.gamma);
  row += ',';
  row += double_to_string(r.alpha_up);
  row += ',';
  row += double_to_string(r.alpha_down);
  row += ',';
  row += double_to_string(r.beta_up);
  row += ',';
  row += double_to_string(r.beta_down);
  row += ',';
  row += double_to_string(r.delta);
  row += ',';
  row += r.attack_kind;
  row += ',';
  row += double_to_string(r.attack_ratio);
  row += ',';
  row += std::to_string(r.trials);
  row += ',';
  row += double_to_string(r.mean_z);
  row += ',';
  row += double_to_string(r.std_z);
  row += ',';
  row += double_to_string(r.detection_rate);
  row += ',';
  row += double_to_string(r.mean_ppl);
  row += ',';
  row += double_to_string(r.std_ppl);
  return row;
}

// CSV with a provenance comment line: tool version plus a hash of the
// generating configuration, so every sweep file records where it came from.
inline std::string records_to_csv(std::span<const ExperimentRecord> records,
                                  std::uint64_t config_hash,
                                  std::span<const std::string> extra_comments = {}) {
  std::string out;
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config_hash));
  out += "# ";
  out += kToolName;
  out += " v";
  out += kToolVersion;
  out += " config_hash=0x";
  out += hash_hex;
  out += '\n';
  for (const std::string& comment : extra_comments) {
    out += "# " + comment + "\n";
  }
  out += kRecordCsvHeader;
  out += '\n';
  for (const ExperimentRecord& r : records) {
    out += record_to_csv_row(r);
    out += '\n';
  }
  return out;
}

inline std::vector<ExperimentRecord> parse_records_csv(std::string_view text) {
  std::vector<ExperimentRecord> records;
  bool header_seen = false;
  for (const std::string& line : split(text, '\n')) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kRecordCsvHeader) throw ParamError("unexpected CSV header: '" + line + "'");
      header_seen = true;
      continue;
    }
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 21) throw ParamError("malformed record row: '" + line + "'");
    ExperimentRecord r;
    r.model_id = f[0];
    r.method = f[1];
    r.sampler_kind = parse_sampler_kind(f[2]);
    r.sampler_param = parse_double(f[3]);
    r.master_seed = parse_u64(f[4]);
    r.gen_len = static_cast<std::uint32_t>(parse_u64(f[5]));
    r.prompt_len = static_cast<std::uint32_t>(parse_u64(f[6]));
    r.gamma = parse_double(f[7]);
    r.alpha_up = parse_double(f[8]);
    r.alpha_down = parse_double(f[9]);
    r.beta_up = parse_double(f[10]);
    r.beta_down = parse_double(f[11]);
    r.delta = parse_double(f[12]);
    r.attack_kind = f[13];
    r.attack_ratio = parse_double(f[14]);
    r.trials = static_cast<std::uint32_t>(parse_u64(f[15]));
    r.mean_z = parse_double(f[16]);
    r.std_z = parse_double(f[17]);
    r.detection_rate = parse_double(f[18]);
    r.mean_ppl = parse_double(f[19]);
    r.std_ppl = parse_double(f[20]);
    records.push_back(std::move(r));
  }
  if (!header_seen) throw ParamError("CSV has no header row");
  return records;
}

// Canonical plan description; its FNV-1a hash travels in the CSV comment.
inline std::string canonical_plan_string(const SweepPlan& plan, std::string_view sweep_label) {
  std::string s;
  s += sweep_label;
  s += '|';
  s += plan.model_id;
  s += '|';
  s += sampler_kind_name(plan.sampler_kind);
  s += '|';
  s += double_to_string(plan.sampler_param);
  s += '|';
  s += std::to_string(plan.master_seed);
  s += '|';
  s += std::to_string(plan.gen_len);
  s += '|';
  s += std::to_string(plan.prompt_len);
  s += '|';
  s += std::to_string(plan.trials);
  s += '|';
  s += format_watermark_config(plan.base);
  s += "grid=";
  for (std::size_t i = 0; i < plan.grid.size(); ++i) {
    if (i > 0) s += ';';
    s += double_to_string(plan.grid[i]);
  }
  return s;
}

inline std::uint64_t plan_config_hash(const SweepPlan& plan, std::string_view sweep_label) {
  return fnv1a64(canonical_plan_string(plan, sweep_label));
}

}  // namespace parmark
