#pragma once

// Visual feature providers: JSON Lines feature/caption files, and a synthetic
// identity world whose features and captions share an attribute vector.

#include "hornet/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace hornet {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ObservationRecord {
  std::string image_key;
  std::size_t identity = 0;
  std::size_t camera = 0;
  std::vector<double> features;
  std::string caption;
};

using Dataset = std::vector<ObservationRecord>;

struct CaptionChannel {
  double sigma_vis = 0.3;
  double p_token_err = 0.15;
  // Per-trial continuation probability of the geometric distractor count.
  double p_distractor = 0.3;
  std::size_t distractor_vocab = 64;
  std::size_t max_distractors = 64;
};

struct IdentityBank {
  std::size_t num_identities = 0;
  std::size_t num_attributes = 0;
  std::size_t visual_dim = 0;
  std::vector<std::vector<std::uint8_t>> attributes;
  Eigen::MatrixXd projection;  // (visual_dim, num_attributes)
  CaptionChannel channel;

  Eigen::VectorXd clean_features(std::size_t identity) const;
};

std::string attribute_token(std::size_t attribute, bool value);
std::string distractor_token(std::size_t index);

enum class TokenClass { attribute, distractor, other };
TokenClass classify_token(const std::string& token);

IdentityBank synth_identity_bank(std::size_t num_identities, std::size_t num_attributes,
                                 std::size_t visual_dim, std::uint64_t seed,
                                 CaptionChannel channel = {});

// F = W a + noise; caption = attribute tokens in canonical order, each
// flipped with p_token_err, plus a geometric number of distractors inserted
// at uniform positions.
ObservationRecord sample_observation(const IdentityBank& bank, std::size_t identity,
                                     std::size_t camera, Rng& rng);

// obs_per_identity records per identity, cameras assigned round-robin.
Dataset synth_dataset(const IdentityBank& bank, std::size_t obs_per_identity,
                      std::size_t num_cameras, Rng& rng, const std::string& key_prefix = "s");

Dataset load_features(const std::filesystem::path& path);
void attach_captions(Dataset& records, const std::filesystem::path& captions_path);
Dataset load_dataset(const std::filesystem::path& features_path,
                     const std::filesystem::path& captions_path);

void write_features(const std::filesystem::path& path, const Dataset& records);
void write_captions(const std::filesystem::path& path, const Dataset& records);

}  // namespace hornet
