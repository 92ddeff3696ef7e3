#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chrono_shield/classifier.hpp"
#include "chrono_shield/geo.hpp"
#include "chrono_shield/image.hpp"

namespace chrono_shield {

enum class RecordSource { archive, remote, manual };

std::string_view to_string(RecordSource source) noexcept;

// A dated, geolocated past photograph of a sign.
struct HistoricalRecord {
  RasterImage image;
  Date capture_date;
  GeoPoint location;
  double heading = 0.0;  // degrees, [0, 360)
  RecordSource source = RecordSource::archive;
  std::string origin;  // path or URL the image came from
  std::string note;    // audit trail, e.g. low-resolution capture
};

enum class VerdictWarning { InsufficientHistory, ConfigurationChange, TieBroken };

std::string_view to_string(VerdictWarning w) noexcept;

struct Vote {
  std::string source;  // "current" or the record's origin
  Prediction prediction;
  std::optional<Date> capture_date;
};

struct Verdict {
  int voted_label = 0;
  double voted_confidence = 0.0;  // mean confidence of the voters agreeing with voted_label
  std::vector<Vote> votes;        // votes[0] is the current image
  bool suspected_attack = false;
  std::vector<VerdictWarning> warnings;

  bool has_warning(VerdictWarning w) const noexcept;
};

struct VotePolicy {
  std::size_t min_history = 3;
  double change_threshold = 0.90;
};

// One vote per image, current image included. Ties go to the highest summed
// confidence, then the lowest class index.
Verdict majority_vote(const Prediction& current, std::span<const Prediction> history,
                      const VotePolicy& policy = {});

// Same, with source tags and capture dates attached to the history votes.
Verdict majority_vote(Vote current, std::vector<Vote> history, const VotePolicy& policy = {});

// Runs the classifier on the current image and every record, then votes.
Verdict defend(const RasterImage& current_image, std::span<const HistoricalRecord> records,
               const ModelWeights& model, const VotePolicy& policy = {});

}  // namespace chrono_shield
