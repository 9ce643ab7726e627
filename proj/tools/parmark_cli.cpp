// Command-line front end: fit/mark/gen/detect/attack/ppl plus the sweep and
// compare experiment drivers. Exit codes: 0 success, 2 bad configuration or
// usage, 3 I/O or file-format failure, 4 internal error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "parmark/parmark.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitInternal = 4;

struct KeyOptions {
  std::string key_text;
  std::string key_hex;

  void add_to(CLI::App& cmd) {
    auto* text = cmd.add_option("--key", key_text, "Secret key as a literal string");
    auto* hex = cmd.add_option("--key-hex", key_hex, "Secret key as hex bytes");
    text->excludes(hex);
  }

  parmark::WatermarkKey resolve() const {
    if (!key_hex.empty()) {
      parmark::WatermarkKey key;
      key.bytes = parmark::hex_decode(key_hex);
      return key;
    }
    if (key_text.empty()) throw parmark::ParamError("a secret key is required (--key or --key-hex)");
    return parmark::WatermarkKey::from_string(key_text);
  }
};

struct ConfigOptions {
  KeyOptions key;
  double gamma = 0.5;
  double alpha_up = 1.0;
  double alpha_down = 1.0;
  double beta_up = 1.0;
  double beta_down = 1.0;
  std::string mode = "multiplicative";
  double delta = 0.0;

  void add_to(CLI::App& cmd) {
    key.add_to(cmd);
    cmd.add_option("--gamma", gamma, "Green-list fraction in (0,1)")->capture_default_str();
    cmd.add_option("--alpha-up", alpha_up, "Green weight-row scale (>= 1)")->capture_default_str();
    cmd.add_option("--alpha-down", alpha_down, "Non-green weight-row scale (<= 1)")
        ->capture_default_str();
    cmd.add_option("--beta-up", beta_up, "Green bias scale (>= 1)")->capture_default_str();
    cmd.add_option("--beta-down", beta_down, "Non-green bias scale (<= 1)")->capture_default_str();
    cmd.add_option("--mode", mode, "multiplicative or additive")->capture_default_str();
    cmd.add_option("--delta", delta, "Additive-baseline logit offset")->capture_default_str();
  }

  parmark::WatermarkConfig resolve() const {
    parmark::WatermarkConfig c;
    c.key = key.resolve();
    c.gamma = gamma;
    c.alpha_up = alpha_up;
    c.alpha_down = alpha_down;
    c.beta_up = beta_up;
    c.beta_down = beta_down;
    c.mode = parmark::parse_watermark_mode(mode);
    c.delta = delta;
    c.validate();
    return c;
  }
};

struct SamplerOptions {
  std::string kind = "temperature";
  double param = 1.0;
  std::uint64_t seed = 0;

  void add_to(CLI::App& cmd, bool with_seed = true) {
    cmd.add_option("--sampler", kind, "greedy, temperature, or nucleus")->capture_default_str();
    cmd.add_option("--sampler-param", param, "Temperature t or nucleus mass p")
        ->capture_default_str();
    if (with_seed) cmd.add_option("--seed", seed, "Sampler RNG seed")->capture_default_str();
  }

  parmark::SamplerSpec resolve() const {
    parmark::SamplerSpec s;
    s.kind = parmark::parse_sampler_kind(kind);
    s.param = param;
    s.rng_seed = seed;
    s.validate();
    return s;
  }
};

struct PlanOptions {
  SamplerOptions sampler;
  std::uint64_t master_seed = 42;
  std::uint32_t trials = 200;
  std::uint32_t length = 200;
  std::uint32_t prompt_len = 32;
  std::uint32_t prompts = 0;  // 0: one prompt per trial
  std::vector<double> grid;

  void add_to(CLI::App& cmd, const std::string& grid_help) {
    sampler.add_to(cmd, /*with_seed=*/false);
    cmd.add_option("--seed", master_seed, "Master seed for trial derivation")
        ->capture_default_str();
    cmd.add_option("--trials", trials, "Trials per sweep point")->capture_default_str();
    cmd.add_option("--length", length, "Tokens generated per trial")->capture_default_str();
    cmd.add_option("--prompt-len", prompt_len, "Prompt length in tokens")->capture_default_str();
    cmd.add_option("--prompts", prompts, "Prompt pool size (default: one per trial)");
    cmd.add_option("--grid", grid, grid_help)->delimiter(',');
  }

  parmark::SweepPlan resolve(const ConfigOptions& config, const std::string& model_id) const {
    parmark::SweepPlan plan;
    plan.model_id = model_id;
    const parmark::SamplerSpec s = sampler.resolve();
    plan.sampler_kind = s.kind;
    plan.sampler_param = s.param;
    plan.master_seed = master_seed;
    plan.gen_len = length;
    plan.prompt_len = prompt_len;
    plan.trials = trials;
    plan.base = config.resolve();
    plan.grid = grid;
    return plan;
  }

  std::uint32_t prompt_pool() const { return prompts == 0 ? trials : prompts; }
};

std::string model_id_from(const std::filesystem::path& path) {
  return path.stem().string();
}

parmark::TokenSequence load_prompt(const std::string& text, const std::string& token_file) {
  if (!token_file.empty()) return parmark::read_token_file(token_file);
  return parmark::tokenize_bytes(text);
}

void write_or_print(const std::string& out_path, const std::string& payload) {
  if (out_path.empty() || out_path == "-") {
    std::fputs(payload.c_str(), stdout);
  } else {
    parmark::write_text_file(out_path, payload);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"parameter-level language-model watermarking toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(parmark::kToolName) + " " +
                                        std::string(parmark::kToolVersion));

  // ---- fit ----------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "Fit a byte-bigram model on a text corpus");
  std::string fit_corpus, fit_out;
  double fit_smoothing = 0.1;
  fit->add_option("--corpus", fit_corpus, "Training text file")->required();
  fit->add_option("--out", fit_out, "Output model file")->required();
  fit->add_option("--smoothing", fit_smoothing, "Add-lambda smoothing")->capture_default_str();
  fit->callback([&] {
    const parmark::TokenSequence corpus =
        parmark::tokenize_bytes(parmark::read_text_file(fit_corpus));
    const parmark::ModelParams model = parmark::fit_bigram_model(corpus, fit_smoothing);
    parmark::save_model(model, fit_out);
    std::fprintf(stderr, "fit: %zu tokens -> %s (|V|=%u, d=%u)\n", corpus.size(),
                 fit_out.c_str(), model.vocab_size, model.hidden_dim);
  });

  // ---- mark ---------------------------------------------------------------
  auto* mark = app.add_subcommand("mark", "Embed a watermark into a model's output layer");
  std::string mark_in, mark_out;
  ConfigOptions mark_config;
  mark->add_option("--model", mark_in, "Source model file")->required();
  mark->add_option("--out", mark_out, "Marked model file")->required();
  mark_config.add_to(*mark);
  mark->callback([&] {
    const parmark::ModelParams source = parmark::load_model(mark_in);
    const parmark::WatermarkConfig config = mark_config.resolve();
    const parmark::MarkedModel marked = parmark::mark_model(source, config);
    parmark::save_model(marked.params, mark_out);
    parmark::save_watermark_config(config, mark_out + ".cfg");
    std::fprintf(stderr, "mark: %s -> %s (+.cfg), %zu green tokens\n", mark_in.c_str(),
                 mark_out.c_str(), marked.green.size());
  });

  // ---- gen ----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate tokens autoregressively");
  std::string gen_model, gen_config, gen_prompt_text, gen_prompt_tokens, gen_out, gen_text_out;
  std::uint32_t gen_length = 200;
  SamplerOptions gen_sampler;
  gen->add_option("--model", gen_model, "Model file (marked or not)")->required();
  gen->add_option("--config", gen_config, "Watermark config for additive-mode generation");
  gen->add_option("--prompt-text", gen_prompt_text, "Prompt as literal text");
  gen->add_option("--prompt-tokens", gen_prompt_tokens, "Prompt as a token file");
  gen->add_option("--length", gen_length, "Number of tokens to generate")->capture_default_str();
  gen->add_option("--out", gen_out, "Output token file (default stdout)");
  gen->add_option("--text-out", gen_text_out, "Also write detokenized bytes here");
  gen_sampler.add_to(*gen);
  gen->callback([&] {
    const parmark::ModelParams model = parmark::load_model(gen_model);
    parmark::GenerationRequest request;
    request.prompt = load_prompt(gen_prompt_text, gen_prompt_tokens);
    request.length = gen_length;
    request.sampler = gen_sampler.resolve();

    parmark::TokenSequence continuation;
    if (!gen_config.empty()) {
      const parmark::WatermarkConfig config = parmark::load_watermark_config(gen_config);
      const parmark::GreenList green =
          parmark::green_list_for(config.key, model.vocab_size, config.gamma);
      const parmark::MarkedModel marked{model, config, green};
      continuation = parmark::generate(marked, request);
    } else {
      continuation = parmark::generate(model, request);
    }
    write_or_print(gen_out, parmark::format_token_line(continuation));
    if (gen_out.empty() || gen_out == "-") std::fputc('\n', stdout);
    if (!gen_text_out.empty()) {
      parmark::write_text_file(gen_text_out, parmark::detokenize_bytes(continuation));
    }
  });

  // ---- detect ---------------------------------------------------------------
  auto* detect_cmd = app.add_subcommand("detect", "Score a token file for the watermark");
  std::string det_tokens;
  KeyOptions det_key;
  double det_gamma = 0.5;
  double det_threshold = parmark::kDefaultZThreshold;
  std::uint32_t det_vocab = parmark::kByteVocabSize;
  std::uint32_t det_prompt_len = 0;
  detect_cmd->add_option("--tokens", det_tokens, "Token file to score")->required();
  det_key.add_to(*detect_cmd);
  detect_cmd->add_option("--gamma", det_gamma, "Green-list fraction")->capture_default_str();
  detect_cmd->add_option("--threshold", det_threshold, "Detection z threshold")
      ->capture_default_str();
  detect_cmd->add_option("--vocab", det_vocab, "Vocabulary size")->capture_default_str();
  detect_cmd->add_option("--prompt-len", det_prompt_len,
                         "Leading tokens to exclude from scoring");
  detect_cmd->callback([&] {
    parmark::TokenSequence tokens = parmark::read_token_file(det_tokens);
    if (det_prompt_len >= tokens.size()) {
      throw parmark::ParamError("prompt-len leaves nothing to score");
    }
    tokens.erase(tokens.begin(), tokens.begin() + det_prompt_len);
    const parmark::GreenList green =
        parmark::green_list_for(det_key.resolve(), det_vocab, det_gamma);
    const parmark::DetectionReport report =
        parmark::detect(tokens, green, det_gamma, det_threshold);
    std::printf("%s\n", report.csv_row().c_str());
  });

  // ---- attack ---------------------------------------------------------------
  auto* attack_cmd = app.add_subcommand("attack", "Perturb a token file");
  std::string atk_in, atk_out, atk_kind = "mask";
  double atk_ratio = 0.0;
  std::uint64_t atk_seed = 0;
  std::uint32_t atk_vocab = parmark::kByteVocabSize;
  attack_cmd->add_option("--tokens", atk_in, "Input token file")->required();
  attack_cmd->add_option("--out", atk_out, "Output token file")->required();
  attack_cmd->add_option("--kind", atk_kind, "mask, delete, or insert")->capture_default_str();
  attack_cmd->add_option("--ratio", atk_ratio, "Fraction of tokens to perturb")
      ->capture_default_str();
  attack_cmd->add_option("--seed", atk_seed, "Attack RNG seed")->capture_default_str();
  attack_cmd->add_option("--vocab", atk_vocab, "Vocabulary size")->capture_default_str();
  attack_cmd->callback([&] {
    const parmark::TokenSequence tokens = parmark::read_token_file(atk_in);
    const parmark::AttackSpec spec{parmark::parse_attack_kind(atk_kind), atk_ratio, atk_seed};
    const parmark::TokenSequence attacked = parmark::apply_attack(tokens, spec, atk_vocab);
    parmark::write_token_file(atk_out, attacked);
    const std::string meta = "kind=" + std::string(parmark::attack_kind_name(spec.kind)) +
                             " ratio=" + parmark::double_to_string(spec.ratio) +
                             " seed=" + std::to_string(spec.rng_seed) +
                             " in_len=" + std::to_string(tokens.size()) +
                             " out_len=" + std::to_string(attacked.size()) + "\n";
    parmark::write_text_file(atk_out + ".meta", meta);
  });

  // ---- ppl ------------------------------------------------------------------
  auto* ppl_cmd = app.add_subcommand("ppl", "Score token-file perplexity under a model");
  std::string ppl_model, ppl_tokens, ppl_id = "text";
  std::uint32_t ppl_prompt_len = 0;
  ppl_cmd->add_option("--model", ppl_model, "Reference (unmarked) model file")->required();
  ppl_cmd->add_option("--tokens", ppl_tokens, "Token file to score")->required();
  ppl_cmd->add_option("--prompt-len", ppl_prompt_len, "Leading tokens used only as context")
      ->capture_default_str();
  ppl_cmd->add_option("--text-id", ppl_id, "Identifier for the CSV row")->capture_default_str();
  ppl_cmd->callback([&] {
    const parmark::ModelParams model = parmark::load_model(ppl_model);
    const parmark::TokenSequence tokens = parmark::read_token_file(ppl_tokens);
    const parmark::PplReport report = parmark::perplexity(model, tokens, ppl_prompt_len);
    std::printf("%s,%llu,%s\n", ppl_id.c_str(),
                static_cast<unsigned long long>(report.scored),
                parmark::double_to_string(report.ppl).c_str());
  });

  // ---- sweep ----------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep and emit CSV");
  sweep->require_subcommand(1);

  struct SweepShared {
    std::string model, corpus, out;
    ConfigOptions config;
    PlanOptions plan;
  };
  auto add_sweep_common = [](CLI::App& cmd, SweepShared& s, const std::string& grid_help) {
    cmd.add_option("--model", s.model, "Unmarked model file")->required();
    cmd.add_option("--corpus", s.corpus, "Prompt source text file")->required();
    cmd.add_option("--out", s.out, "Output CSV file (default stdout)");
    s.config.add_to(cmd);
    s.plan.add_to(cmd, grid_help);
  };

  SweepShared alpha_s, gamma_s, attack_s;
  alpha_s.plan.grid = {1.0, 1.05, 1.1, 1.2, 1.3};
  auto* sweep_alpha_cmd = sweep->add_subcommand("alpha", "Sweep the green weight scale alpha_up");
  add_sweep_common(*sweep_alpha_cmd, alpha_s, "alpha_up values (comma separated)");

  auto* sweep_gamma_cmd = sweep->add_subcommand("gamma", "Sweep the green fraction gamma");
  gamma_s.plan.grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  gamma_s.config.alpha_up = 1.1;
  add_sweep_common(*sweep_gamma_cmd, gamma_s, "gamma values (comma separated)");

  auto* sweep_attack_cmd = sweep->add_subcommand("attack", "Sweep attack ratios");
  attack_s.plan.grid = {0.0, 0.1, 0.3, 0.5};
  attack_s.config.alpha_up = 1.1;
  std::vector<std::string> attack_kinds{"mask", "delete", "insert"};
  add_sweep_common(*sweep_attack_cmd, attack_s, "attack ratios (comma separated)");
  sweep_attack_cmd->add_option("--kinds", attack_kinds, "Attack kinds to sweep")
      ->delimiter(',');

  auto run_sweep = [](const SweepShared& s, const std::string& label,
                      const std::vector<std::string>& kinds) {
    const parmark::ModelParams model = parmark::load_model(s.model);
    const parmark::SweepPlan plan = s.plan.resolve(s.config, model_id_from(s.model));
    const parmark::IngestResult ingested = parmark::ingest_corpus(
        s.corpus, plan.prompt_len, s.plan.prompt_pool(), plan.master_seed);
    std::vector<parmark::ExperimentRecord> records;
    if (label == "alpha") {
      records = parmark::sweep_alpha(model, ingested.prompts, plan);
    } else if (label == "gamma") {
      records = parmark::sweep_gamma(model, ingested.prompts, plan);
    } else {
      std::vector<parmark::AttackKind> parsed;
      for (const std::string& k : kinds) parsed.push_back(parmark::parse_attack_kind(k));
      records = parmark::sweep_attack(model, ingested.prompts, plan, parsed);
    }
    write_or_print(s.out, parmark::records_to_csv(records, parmark::plan_config_hash(plan, label)));
  };

  sweep_alpha_cmd->callback([&] { run_sweep(alpha_s, "alpha", {}); });
  sweep_gamma_cmd->callback([&] { run_sweep(gamma_s, "gamma", {}); });
  sweep_attack_cmd->callback([&] { run_sweep(attack_s, "attack", attack_kinds); });

  // ---- compare ----------------------------------------------------------------
  auto* compare_cmd = app.add_subcommand("compare", "Compare unmarked/additive/multiplicative");
  SweepShared cmp;
  cmp.config.alpha_up = 1.1;
  cmp.config.delta = 2.0;  // additive-baseline row offset
  compare_cmd->add_option("--model", cmp.model, "Unmarked model file")->required();
  compare_cmd->add_option("--corpus", cmp.corpus, "Prompt source text file")->required();
  compare_cmd->add_option("--out", cmp.out, "Output CSV file (default stdout)");
  cmp.config.add_to(*compare_cmd);
  cmp.plan.add_to(*compare_cmd, "(unused for compare)");
  compare_cmd->callback([&] {
    const parmark::ModelParams model = parmark::load_model(cmp.model);
    parmark::SweepPlan plan = cmp.plan.resolve(cmp.config, model_id_from(cmp.model));
    plan.grid = {1.0};  // unused axis; plan validation wants a grid
    const parmark::IngestResult ingested = parmark::ingest_corpus(
        cmp.corpus, plan.prompt_len, cmp.plan.prompt_pool(), plan.master_seed);
    const auto records = parmark::compare_methods(model, ingested.prompts, plan, cmp.config.delta);
    // Full-scale reference figures from the literature, carried as metadata
    // only; desk-scale numbers are not comparable to them.
    const std::vector<std::string> comments = {
        "reference-full-scale: baseline z=-1.42 ppl=3.82; additive z=7.34 ppl=5.08; "
        "multiplicative z=6.49 ppl=3.93"};
    write_or_print(cmp.out,
                   parmark::records_to_csv(records, parmark::plan_config_hash(plan, "compare"),
                                           comments));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const parmark::ParamError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const parmark::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
}
