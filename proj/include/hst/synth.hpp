#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hst/ctc.hpp"
#include "hst/error.hpp"
#include "hst/io.hpp"
#include "hst/path_search.hpp"
#include "hst/refine.hpp"
#include "hst/rng.hpp"
#include "hst/trainer.hpp"
#include "hst/tree.hpp"
#include "hst/types.hpp"

namespace hst {

struct SynthConfig {
  int n_glosses = 10;
  int subactions_per_gloss = 4;
  int dimension = 32;
  int frames_per_subaction = 3;
  double noise_sigma = 0.1;
  int sentence_length_min = 2;
  int sentence_length_max = 4;
  int n_train = 200;
  int n_eval = 50;
  std::uint64_t seed = 7;
};

inline void check_synth_config(const SynthConfig& c) {
  require(c.n_glosses >= 1 && c.subactions_per_gloss >= 1 && c.frames_per_subaction >= 1 &&
              c.n_train >= 1 && c.n_eval >= 1,
          ErrorCode::config, "synth: counts must be >= 1");
  require(c.dimension >= 2, ErrorCode::config, "synth: dimension must be >= 2");
  require(c.noise_sigma >= 0.0, ErrorCode::config, "synth: noise_sigma must be >= 0");
  require(c.sentence_length_min >= 1 && c.sentence_length_max >= c.sentence_length_min,
          ErrorCode::config, "synth: invalid sentence length range");
}

namespace synth_detail {

// Magnitude of the per-position drift added to a gloss prototype, giving the
// sub-actions of one gloss a temporal ordering in embedding space.
constexpr double kDriftScale = 0.2;

inline EmbeddingVector random_unit(Mcg64& rng, int dimension) {
  EmbeddingVector v(dimension);
  for (double& x : v) x = rng.next_gaussian();
  return normalized(std::move(v));
}

// Gloss prototypes drawn by rejection until every pair has cosine < 0.5, so
// classes stay separable at small dimension.
inline std::vector<EmbeddingVector> sample_prototypes(Mcg64& rng, const SynthConfig& c) {
  std::vector<EmbeddingVector> protos;
  for (int g = 0; g < c.n_glosses; ++g) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      auto candidate = random_unit(rng, c.dimension);
      bool ok = true;
      for (const auto& p : protos)
        if (cosine(candidate, p) >= 0.5) {
          ok = false;
          break;
        }
      if (ok) {
        protos.push_back(std::move(candidate));
        placed = true;
      }
    }
    require(placed, ErrorCode::infeasible,
            "synth: could not separate " + std::to_string(c.n_glosses) +
                " prototypes at dimension " + std::to_string(c.dimension));
  }
  return protos;
}

}  // namespace synth_detail

// Per gloss: a unit prototype, a drift direction, and sub-action embeddings
// normalize(prototype + k*drift + noise). Deterministic for a fixed config.
inline DescriptionCorpus generate_corpus(const SynthConfig& config) {
  check_synth_config(config);
  Mcg64 rng(derive_seed(config.seed, 0x636f7270ull));  // "corp"

  const auto prototypes = synth_detail::sample_prototypes(rng, config);

  DescriptionCorpus corpus;
  corpus.dimension = config.dimension;
  std::int64_t next_statement_id = 0;
  for (int g = 0; g < config.n_glosses; ++g) {
    GlossEntry entry;
    entry.gloss_id = g;
    entry.gloss_text = "gloss_" + std::to_string(g);

    auto drift = synth_detail::random_unit(rng, config.dimension);
    for (double& x : drift) x *= synth_detail::kDriftScale;

    for (int k = 0; k < config.subactions_per_gloss; ++k) {
      SubactionStatement s;
      s.statement_id = next_statement_id++;
      s.gloss_id = g;
      s.position = k;
      s.text = "gloss_" + std::to_string(g) + "_sub_" + std::to_string(k);
      EmbeddingVector e = prototypes[g];
      add_scaled(e, static_cast<double>(k), drift);
      for (double& x : e) x += config.noise_sigma * rng.next_gaussian();
      s.embedding = normalized(std::move(e));
      entry.statements.push_back(std::move(s));
    }
    corpus.glosses.push_back(std::move(entry));
  }
  return corpus;
}

// Frames: for each gloss of the sentence, frames_per_subaction noisy copies
// of every sub-action embedding in order. Raw features live in the corpus
// embedding space, so the identity projection is a known-good alignment.
inline Matrix generate_video(const SynthConfig& config, const DescriptionCorpus& corpus,
                             const GlossSequence& sentence, Mcg64& rng) {
  check_labels(sentence, corpus.vocabulary_size());
  const std::size_t frames = sentence.labels.size() *
                             static_cast<std::size_t>(config.subactions_per_gloss) *
                             static_cast<std::size_t>(config.frames_per_subaction);
  Matrix video(frames, static_cast<std::size_t>(config.dimension));
  std::size_t t = 0;
  for (int gloss : sentence.labels) {
    for (const auto& statement : corpus.glosses[static_cast<std::size_t>(gloss)].statements) {
      for (int rep = 0; rep < config.frames_per_subaction; ++rep) {
        auto row = video.row(t++);
        for (std::size_t i = 0; i < row.size(); ++i)
          row[i] = statement.embedding[i] + config.noise_sigma * rng.next_gaussian();
      }
    }
  }
  return video;
}

// A sentence without adjacent repeats, length uniform in the configured range.
inline GlossSequence random_sentence(const SynthConfig& config, Mcg64& rng) {
  const int span = config.sentence_length_max - config.sentence_length_min + 1;
  const int length = config.sentence_length_min + static_cast<int>(rng.next_index(span));
  GlossSequence sentence;
  for (int i = 0; i < length; ++i) {
    int gloss = static_cast<int>(rng.next_index(config.n_glosses));
    while (!sentence.labels.empty() && config.n_glosses > 1 && gloss == sentence.labels.back())
      gloss = static_cast<int>(rng.next_index(config.n_glosses));
    sentence.labels.push_back(gloss);
  }
  return sentence;
}

struct SynthDataset {
  SynthConfig config;
  DescriptionCorpus corpus;
  std::vector<TrainSample> train;
  std::vector<TrainSample> eval;
};

// Deterministic dataset; evaluation sentences are resampled until they are
// disjoint (as sequences) from the training sentences.
inline SynthDataset generate_dataset(const SynthConfig& config) {
  check_synth_config(config);
  SynthDataset ds;
  ds.config = config;
  ds.corpus = generate_corpus(config);

  Mcg64 rng(derive_seed(config.seed, 0x64617461ull));  // "data"
  std::set<std::vector<int>> train_sentences;
  for (int i = 0; i < config.n_train; ++i) {
    const auto sentence = random_sentence(config, rng);
    train_sentences.insert(sentence.labels);
    TrainSample sample;
    sample.id = "train_" + std::to_string(i);
    sample.labels = sentence;
    sample.raw = generate_video(config, ds.corpus, sentence, rng);
    ds.train.push_back(std::move(sample));
  }
  for (int i = 0; i < config.n_eval; ++i) {
    GlossSequence sentence = random_sentence(config, rng);
    int guard = 0;
    while (train_sentences.count(sentence.labels)) {
      require(++guard <= 100000, ErrorCode::infeasible,
              "synth: cannot draw evaluation sentences disjoint from training");
      sentence = random_sentence(config, rng);
    }
    TrainSample sample;
    sample.id = "eval_" + std::to_string(i);
    sample.labels = sentence;
    sample.raw = generate_video(config, ds.corpus, sentence, rng);
    ds.eval.push_back(std::move(sample));
  }

  for (const auto& s : ds.train)
    require(static_cast<int>(s.raw.rows()) >= detail::min_frames_for(s.labels),
            ErrorCode::validation, "synth: training video infeasible for CTC");
  for (const auto& s : ds.eval)
    require(static_cast<int>(s.raw.rows()) >= detail::min_frames_for(s.labels),
            ErrorCode::validation, "synth: evaluation video infeasible for CTC");
  return ds;
}

inline nlohmann::ordered_json synth_config_to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["n_glosses"] = c.n_glosses;
  j["subactions_per_gloss"] = c.subactions_per_gloss;
  j["dimension"] = c.dimension;
  j["frames_per_subaction"] = c.frames_per_subaction;
  j["noise_sigma"] = c.noise_sigma;
  j["sentence_length_range"] = {c.sentence_length_min, c.sentence_length_max};
  j["n_train"] = c.n_train;
  j["n_eval"] = c.n_eval;
  j["seed"] = c.seed;
  return j;
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  if (j.contains("n_glosses")) c.n_glosses = j.at("n_glosses").get<int>();
  if (j.contains("subactions_per_gloss"))
    c.subactions_per_gloss = j.at("subactions_per_gloss").get<int>();
  if (j.contains("dimension")) c.dimension = j.at("dimension").get<int>();
  if (j.contains("frames_per_subaction"))
    c.frames_per_subaction = j.at("frames_per_subaction").get<int>();
  if (j.contains("noise_sigma")) c.noise_sigma = j.at("noise_sigma").get<double>();
  if (j.contains("sentence_length_range")) {
    const auto& r = j.at("sentence_length_range");
    require(r.is_array() && r.size() == 2, ErrorCode::parse,
            "synth config: sentence_length_range must be [min, max]");
    c.sentence_length_min = r[0].get<int>();
    c.sentence_length_max = r[1].get<int>();
  }
  if (j.contains("n_train")) c.n_train = j.at("n_train").get<int>();
  if (j.contains("n_eval")) c.n_eval = j.at("n_eval").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  check_synth_config(c);
  return c;
}

// Directory layout written by gen-synth and read back by train/ablate:
//   corpus.jsonl, synth_config.json, train/<id>.features.tsv,
//   train/<id>.labels.txt, eval/...
inline void write_dataset(const SynthDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "train");
  fs::create_directories(dir / "eval");
  save_description_corpus(ds.corpus, dir / "corpus.jsonl");
  {
    auto out = open_for_write(dir / "synth_config.json");
    out << synth_config_to_json(ds.config).dump(2) << '\n';
  }
  const auto write_split = [&](const std::vector<TrainSample>& split, const fs::path& sub) {
    for (const auto& s : split) {
      save_matrix(s.raw, sub / (s.id + ".features.tsv"));
      save_gloss_sequence(s.labels, sub / (s.id + ".labels.txt"));
    }
  };
  write_split(ds.train, dir / "train");
  write_split(ds.eval, dir / "eval");
}

inline std::vector<TrainSample> load_split(const std::filesystem::path& sub) {
  namespace fs = std::filesystem;
  require(fs::is_directory(sub), ErrorCode::io, sub.string() + " is not a directory");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(sub)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = ".features.tsv";
    if (name.size() > suffix.size() && name.ends_with(suffix))
      ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  require(!ids.empty(), ErrorCode::empty_input, sub.string() + ": no samples");
  std::vector<TrainSample> out;
  for (const auto& id : ids) {
    TrainSample s;
    s.id = id;
    s.raw = load_matrix(sub / (id + ".features.tsv"));
    s.labels = load_gloss_sequence(sub / (id + ".labels.txt"));
    out.push_back(std::move(s));
  }
  return out;
}

inline SynthDataset load_dataset(const std::filesystem::path& dir) {
  SynthDataset ds;
  {
    auto in = open_for_read(dir / "synth_config.json");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse, (dir / "synth_config.json").string() + ": " + e.what());
    }
    ds.config = synth_config_from_json(j);
  }
  ds.corpus = load_description_corpus(dir / "corpus.jsonl");
  ds.train = load_split(dir / "train");
  ds.eval = load_split(dir / "eval");
  return ds;
}

// ---------------------------------------------------------------------------
// Ablation harness

struct AblationGrid {
  std::vector<double> alphas = {1.0, 1.25, 1.5, 1.75, 2.0};
  std::vector<int> depths = {1, 2, 3};
  std::vector<std::string> decode_inputs = {"origin", "updated"};
  TrainConfig train;
  SearchConfig search;
  std::uint64_t tree_seed = 7;
};

struct AblationCell {
  int depth = 0;
  double alpha = 0.0;
  std::string decode_input;
  double dev_wer = 0.0;   // training split
  double eval_wer = 0.0;  // held-out split
  std::string error;      // nonempty when this cell failed
};

struct AblationReport {
  SynthConfig synth;
  AblationGrid grid;
  std::vector<AblationCell> cells;
  std::map<int, double> final_train_loss;  // per depth

  const AblationCell* find(int depth, double alpha, const std::string& input) const {
    for (const auto& c : cells)
      if (c.depth == depth && c.alpha == alpha && c.decode_input == input) return &c;
    return nullptr;
  }
};

namespace synth_detail {

// Corpus-level WER: total edit distance over total reference length.
struct WerAccumulator {
  double edits = 0.0;
  double ref_len = 0.0;
  void add(const GlossSequence& ref, const GlossSequence& hyp) {
    edits += word_error_rate(ref, hyp) * static_cast<double>(ref.labels.size());
    ref_len += static_cast<double>(ref.labels.size());
  }
  double value() const { return ref_len > 0.0 ? edits / ref_len : 0.0; }
};

}  // namespace synth_detail

// Trains one model per tree depth, then scores every (depth, alpha, input)
// cell on both splits. A failing cell records its error and the sweep
// continues.
inline AblationReport run_ablation(const SynthDataset& ds, const AblationGrid& grid) {
  AblationReport report;
  report.synth = ds.config;
  report.grid = grid;

  for (int depth : grid.depths) {
    SubactionTree tree;
    LinearModel model = LinearModel::init(1, 1, 1, 0);
    std::string depth_error;
    try {
      TreeConfig tree_config;
      tree_config.depth = depth;
      tree_config.seed = grid.tree_seed;
      tree = build_tree(ds.corpus, tree_config);

      model = LinearModel::init(ds.config.dimension, ds.config.dimension,
                                ds.corpus.vocabulary_size(),
                                derive_seed(grid.train.seed, 0x7472ull, depth));
      TrainConfig tc = grid.train;
      tc.seed = derive_seed(grid.train.seed, 0x7472ull, depth);
      const auto trace = train(model, ds.train, tree, tc);
      report.final_train_loss[depth] = trace.epoch_losses.back();
    } catch (const std::exception& e) {
      depth_error = e.what();
    }

    // One forward + path search per sample, shared by every alpha cell.
    struct Scored {
      const TrainSample* sample;
      LogitMatrix probs;
      PathSelection path;
    };
    std::vector<Scored> dev_scored, eval_scored;
    if (depth_error.empty()) {
      try {
        const auto score_split = [&](const std::vector<TrainSample>& split,
                                     std::vector<Scored>& out) {
          for (const auto& s : split) {
            auto fwd = forward(model, s.raw, s.id);
            auto path = search_path(tree, fwd.aligned, grid.search);
            out.push_back({&s, std::move(fwd.probs), std::move(path)});
          }
        };
        score_split(ds.train, dev_scored);
        score_split(ds.eval, eval_scored);
      } catch (const std::exception& e) {
        depth_error = e.what();
      }
    }

    for (const std::string& input : grid.decode_inputs) {
      for (double alpha : grid.alphas) {
        AblationCell cell;
        cell.depth = depth;
        cell.alpha = alpha;
        cell.decode_input = input;
        if (!depth_error.empty()) {
          cell.error = depth_error;
          report.cells.push_back(cell);
          continue;
        }
        try {
          RefinerConfig rc;
          rc.alpha = alpha;
          const auto score = [&](const std::vector<Scored>& scored) {
            synth_detail::WerAccumulator acc;
            for (const auto& sc : scored) {
              LogitMatrix decoded_input = sc.probs;
              if (input == "updated") {
                const auto w = build_update_matrix(sc.path, tree,
                                                   static_cast<int>(sc.probs.frames()),
                                                   ds.corpus.vocabulary_size(), rc);
                decoded_input = refine_logits(sc.probs, w, rc);
              }
              acc.add(sc.sample->labels, ctc_decode(decoded_input, DecodeConfig{}));
            }
            return acc.value();
          };
          cell.dev_wer = score(dev_scored);
          cell.eval_wer = score(eval_scored);
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        report.cells.push_back(cell);
      }
    }
  }
  return report;
}

inline nlohmann::ordered_json ablation_report_to_json(const AblationReport& report) {
  nlohmann::ordered_json j;
  j["synth_config"] = synth_config_to_json(report.synth);
  j["grid"] = {{"alphas", report.grid.alphas},
               {"depths", report.grid.depths},
               {"decode_inputs", report.grid.decode_inputs},
               {"train", {{"learning_rate", report.grid.train.learning_rate},
                          {"epochs", report.grid.train.epochs},
                          {"lambda_c", report.grid.train.lambda_c},
                          {"seed", report.grid.train.seed}}},
               {"search", {{"granularity", granularity_name(report.grid.search.granularity)},
                           {"window_radius", report.grid.search.window_radius}}},
               {"tree_seed", report.grid.tree_seed}};
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    nlohmann::ordered_json cj;
    cj["depth"] = c.depth;
    cj["alpha"] = c.alpha;
    cj["decode_input"] = c.decode_input;
    if (c.error.empty()) {
      cj["dev_wer"] = c.dev_wer;
      cj["eval_wer"] = c.eval_wer;
    } else {
      cj["error"] = c.error;
    }
    cells.push_back(std::move(cj));
  }
  auto& losses = j["final_train_loss"] = nlohmann::ordered_json::object();
  for (const auto& [depth, loss] : report.final_train_loss)
    losses[std::to_string(depth)] = loss;
  return j;
}

// Aligned text table, one row per (depth, input, alpha), WER as percentages.
inline std::string render_ablation_table(const AblationReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-6s %-8s %-8s %10s %10s\n", "depth", "input", "alpha",
                "dev WER", "eval WER");
  out += line;
  for (const auto& c : report.cells) {
    if (!c.error.empty()) {
      std::snprintf(line, sizeof(line), "%-6d %-8s %-8.2f %10s %10s  (%s)\n", c.depth,
                    c.decode_input.c_str(), c.alpha, "-", "-", c.error.c_str());
    } else {
      std::snprintf(line, sizeof(line), "%-6d %-8s %-8.2f %9.1f%% %9.1f%%\n", c.depth,
                    c.decode_input.c_str(), c.alpha, 100.0 * c.dev_wer, 100.0 * c.eval_wer);
    }
    out += line;
  }
  return out;
}

}  // namespace hst
