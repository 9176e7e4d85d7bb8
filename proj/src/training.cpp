#include "lexpred/training.hpp"

#include <json.hpp>

using json = nlohmann::json;

namespace lexpred {

namespace {

template <typename V>
size_t draw_index(Rng& rng, const std::vector<V>& options, const char* field) {
  if (options.empty())
    throw ValidationError(std::string("random_search: empty option set for ") +
                          field);
  return size_t(rng.uniform_int(int64_t(options.size())));
}

}  // namespace

std::vector<SearchDraw> sample_search(const SearchSpace& space, int n,
                                      uint64_t seed) {
  if (n < 1) throw ValidationError("random_search: n must be >= 1");
  Rng rng(seed);
  std::vector<SearchDraw> out;
  out.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    SearchDraw d;
    d.batch = space.batch[draw_index(rng, space.batch, "batch")];
    d.dropout = space.dropout[draw_index(rng, space.dropout, "dropout")];
    d.word_dropout =
        space.word_dropout[draw_index(rng, space.word_dropout, "word_dropout")];
    d.hidden = space.hidden[draw_index(rng, space.hidden, "hidden")];
    d.stack = space.stack[draw_index(rng, space.stack, "stack")];
    out.push_back(d);
  }
  return out;
}

void validate_search_ranges(const TrainConfig& cfg, int hidden, int stack,
                            const SearchSpace& space) {
  auto in = [](auto v, const auto& opts) {
    for (auto o : opts)
      if (o == v) return true;
    return false;
  };
  if (!in(cfg.batch, space.batch))
    throw ValidationError("config: field 'batch' value " +
                          std::to_string(cfg.batch) +
                          " outside the search ranges");
  if (!in(cfg.dropout, space.dropout))
    throw ValidationError("config: field 'dropout' value " +
                          std::to_string(cfg.dropout) +
                          " outside the search ranges");
  if (!in(cfg.word_dropout, space.word_dropout))
    throw ValidationError("config: field 'word_dropout' value " +
                          std::to_string(cfg.word_dropout) +
                          " outside the search ranges");
  if (!in(hidden, space.hidden))
    throw ValidationError("config: field 'hidden' value " +
                          std::to_string(hidden) +
                          " outside the search ranges");
  if (!in(stack, space.stack))
    throw ValidationError("config: field 'stack' value " +
                          std::to_string(stack) +
                          " outside the search ranges");
}

std::string history_to_json_string(const RunResult& r) {
  json j;
  j["best_epoch"] = r.best_epoch;
  j["best_dev_loss"] = r.best_dev_loss;
  json eps = json::array();
  for (auto& e : r.history) {
    json je;
    je["epoch"] = e.epoch;
    je["train_loss"] = e.train_loss;
    je["dev_loss"] = e.dev_loss;
    eps.push_back(je);
  }
  j["epochs"] = eps;
  return j.dump(2) + "\n";
}

std::vector<uint64_t> multi_run_seeds(uint64_t base_seed, int runs) {
  if (runs < 2) throw ValidationError("multi_run: needs at least 2 runs");
  std::vector<uint64_t> seeds;
  for (int i = 0; i < runs; ++i) seeds.push_back(base_seed + uint64_t(i));
  return seeds;
}

}  // namespace lexpred
