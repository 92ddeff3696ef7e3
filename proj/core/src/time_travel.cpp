#include "chrono_shield/time_travel.hpp"

#include <algorithm>
#include <map>

namespace chrono_shield {

std::string_view to_string(RecordSource source) noexcept {
  switch (source) {
    case RecordSource::archive: return "archive";
    case RecordSource::remote: return "remote";
    case RecordSource::manual: return "manual";
  }
  return "unknown";
}

std::string_view to_string(VerdictWarning w) noexcept {
  switch (w) {
    case VerdictWarning::InsufficientHistory: return "InsufficientHistory";
    case VerdictWarning::ConfigurationChange: return "ConfigurationChange";
    case VerdictWarning::TieBroken: return "TieBroken";
  }
  return "unknown";
}

bool Verdict::has_warning(VerdictWarning w) const noexcept {
  return std::find(warnings.begin(), warnings.end(), w) != warnings.end();
}

Verdict majority_vote(Vote current, std::vector<Vote> history, const VotePolicy& policy) {
  Verdict v;
  v.votes.reserve(history.size() + 1);
  v.votes.push_back(std::move(current));
  for (auto& h : history) v.votes.push_back(std::move(h));

  struct Tally {
    std::size_t count = 0;
    double confidence = 0.0;
  };
  std::map<int, Tally> tally;  // ordered by label, so lowest index wins final ties
  for (const Vote& vote : v.votes) {
    auto& t = tally[vote.prediction.label];
    ++t.count;
    t.confidence += vote.prediction.confidence;
  }

  std::size_t top = 0;
  for (const auto& [label, t] : tally) top = std::max(top, t.count);
  int winner = -1;
  std::size_t tied = 0;
  double best_conf = -1.0;
  for (const auto& [label, t] : tally) {
    if (t.count != top) continue;
    ++tied;
    if (t.confidence > best_conf) {
      best_conf = t.confidence;
      winner = label;
    }
  }
  v.voted_label = winner;
  v.voted_confidence = tally[winner].confidence / static_cast<double>(tally[winner].count);
  if (tied > 1) v.warnings.push_back(VerdictWarning::TieBroken);

  const Prediction& now = v.votes.front().prediction;
  v.suspected_attack = now.label != v.voted_label;

  const std::size_t past = v.votes.size() - 1;
  if (past < policy.min_history) v.warnings.push_back(VerdictWarning::InsufficientHistory);
  if (past > 0) {
    const int past_label = v.votes[1].prediction.label;
    const bool unanimous = std::all_of(v.votes.begin() + 1, v.votes.end(),
                                       [&](const Vote& h) { return h.prediction.label == past_label; });
    if (unanimous && now.label != past_label && now.confidence >= policy.change_threshold) {
      v.warnings.push_back(VerdictWarning::ConfigurationChange);
    }
  }
  return v;
}

Verdict majority_vote(const Prediction& current, std::span<const Prediction> history, const VotePolicy& policy) {
  std::vector<Vote> past;
  past.reserve(history.size());
  for (std::size_t i = 0; i < history.size(); ++i) {
    past.push_back({"history[" + std::to_string(i) + "]", history[i], std::nullopt});
  }
  return majority_vote(Vote{"current", current, std::nullopt}, std::move(past), policy);
}

Verdict defend(const RasterImage& current_image, std::span<const HistoricalRecord> records,
               const ModelWeights& model, const VotePolicy& policy) {
  Vote now{"current", forward(model, current_image), std::nullopt};
  std::vector<Vote> past;
  past.reserve(records.size());
  for (const auto& r : records) {
    past.push_back({r.origin.empty() ? std::string(to_string(r.source)) : r.origin, forward(model, r.image),
                    r.capture_date});
  }
  return majority_vote(std::move(now), std::move(past), policy);
}

}  // namespace chrono_shield
