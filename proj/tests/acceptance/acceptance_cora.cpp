// Cora accuracy check. Expects a pre-converted dataset file (the public
// 140/500/1000 split) at $GATAS_CORA_PATH or $GATAS_DATA_DIR/cora.txt.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "gatas/data.hpp"
#include "gatas/train.hpp"

using namespace gatas;

namespace {

constexpr double kMinTestAccuracy = 0.78;
constexpr double kBudgetSeconds = 3600;
constexpr std::uint32_t kSampleSize = 100;

std::filesystem::path dataset_path() {
  if (const char* p = std::getenv("GATAS_CORA_PATH")) return p;
  if (const char* d = std::getenv("GATAS_DATA_DIR")) return std::filesystem::path(d) / "cora.txt";
  return "data/cora.txt";
}

}  // namespace

int main() {
  const auto path = dataset_path();
  if (!std::filesystem::exists(path)) {
    std::printf("FAIL criterion 5 cora accuracy: dataset not found at %s (set GATAS_CORA_PATH)\n",
                path.string().c_str());
    return 1;
  }
  try {
    const auto start = std::chrono::steady_clock::now();
    const DatasetBundle bundle = load_dataset(path, Task::kMultiClass);
    Config c = defaults_for(Task::kMultiClass);
    c.sample_size = kSampleSize;
    const TrainingData data = prepare(bundle, c);
    GatasModel<float> model(model_config(c, data), data.graph, c.seed);
    const FitResult fitted = fit(model, data, c);
    const Evaluation test = evaluate(model, data, Split::kTest, c);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = test.value >= kMinTestAccuracy && elapsed <= kBudgetSeconds;
    std::printf("%s criterion 5 cora accuracy: test accuracy %.4f on %zu nodes (limit >= %.2f), best epoch %u, "
                "validation %.4f, %.0f s (limit %.0f s)\n",
                pass ? "PASS" : "FAIL", test.value, test.count, kMinTestAccuracy, fitted.best_epoch,
                fitted.best.value, elapsed, kBudgetSeconds);
    return pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::printf("FAIL criterion 5 cora accuracy: %s\n", e.what());
    return 1;
  }
}
