#include "hornet/visual.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

namespace hornet {

using nlohmann::json;

Eigen::VectorXd IdentityBank::clean_features(std::size_t identity) const {
  Eigen::VectorXd a(num_attributes);
  for (std::size_t m = 0; m < num_attributes; ++m) a[m] = attributes.at(identity)[m];
  return projection * a;
}

std::string attribute_token(std::size_t attribute, bool value) {
  return "a" + std::to_string(attribute) + (value ? "on" : "off");
}

std::string distractor_token(std::size_t index) { return "filler" + std::to_string(index); }

TokenClass classify_token(const std::string& token) {
  auto digits_then = [&](std::size_t from, std::size_t& end) {
    end = from;
    while (end < token.size() && std::isdigit(static_cast<unsigned char>(token[end]))) ++end;
    return end > from;
  };
  std::size_t end = 0;
  if (token.rfind("filler", 0) == 0 && digits_then(6, end) && end == token.size())
    return TokenClass::distractor;
  if (!token.empty() && token[0] == 'a' && digits_then(1, end)) {
    const std::string rest = token.substr(end);
    if (rest == "on" || rest == "off") return TokenClass::attribute;
  }
  return TokenClass::other;
}

IdentityBank synth_identity_bank(std::size_t num_identities, std::size_t num_attributes,
                                 std::size_t visual_dim, std::uint64_t seed,
                                 CaptionChannel channel) {
  if (num_attributes == 0 || visual_dim == 0 || num_identities == 0)
    throw std::invalid_argument("synth_identity_bank: dimensions must be positive");
  if (num_attributes < 64 && (std::uint64_t{1} << num_attributes) < num_identities)
    throw std::invalid_argument("synth_identity_bank: 2^" + std::to_string(num_attributes) +
                                " < " + std::to_string(num_identities) +
                                " identities, attribute vectors cannot be distinct");
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(channel.p_token_err) || !in_unit(channel.p_distractor) || channel.sigma_vis < 0.0)
    throw std::invalid_argument("synth_identity_bank: channel probabilities must lie in [0,1]");

  Rng rng(seed);
  IdentityBank bank;
  bank.num_identities = num_identities;
  bank.num_attributes = num_attributes;
  bank.visual_dim = visual_dim;
  bank.channel = channel;
  std::set<std::vector<std::uint8_t>> seen;
  while (bank.attributes.size() < num_identities) {
    std::vector<std::uint8_t> a(num_attributes);
    for (auto& bit : a) bit = static_cast<std::uint8_t>(rng.below(2));
    if (seen.insert(a).second) bank.attributes.push_back(std::move(a));
  }
  bank.projection.resize(static_cast<Eigen::Index>(visual_dim),
                         static_cast<Eigen::Index>(num_attributes));
  for (Eigen::Index r = 0; r < bank.projection.rows(); ++r)
    for (Eigen::Index c = 0; c < bank.projection.cols(); ++c)
      bank.projection(r, c) = rng.uniform(-1.0, 1.0);
  return bank;
}

ObservationRecord sample_observation(const IdentityBank& bank, std::size_t identity,
                                     std::size_t camera, Rng& rng) {
  if (identity >= bank.num_identities)
    throw std::out_of_range("sample_observation: identity " + std::to_string(identity) +
                            " not in bank");
  const auto& ch = bank.channel;
  ObservationRecord rec;
  rec.identity = identity;
  rec.camera = camera;
  const Eigen::VectorXd clean = bank.clean_features(identity);
  rec.features.resize(bank.visual_dim);
  for (std::size_t i = 0; i < bank.visual_dim; ++i)
    rec.features[i] = clean[static_cast<Eigen::Index>(i)] +
                      (ch.sigma_vis > 0.0 ? ch.sigma_vis * rng.normal() : 0.0);

  std::vector<std::string> tokens;
  const auto& attrs = bank.attributes[identity];
  for (std::size_t m = 0; m < bank.num_attributes; ++m) {
    bool value = attrs[m] != 0;
    if (rng.bernoulli(ch.p_token_err)) value = !value;
    tokens.push_back(attribute_token(m, value));
  }
  const std::size_t extra = rng.geometric_count(ch.p_distractor, ch.max_distractors);
  for (std::size_t k = 0; k < extra; ++k) {
    const auto pos = static_cast<std::ptrdiff_t>(rng.below(tokens.size() + 1));
    tokens.insert(tokens.begin() + pos, distractor_token(rng.below(ch.distractor_vocab)));
  }
  for (const auto& t : tokens) {
    if (!rec.caption.empty()) rec.caption += ' ';
    rec.caption += t;
  }
  return rec;
}

Dataset synth_dataset(const IdentityBank& bank, std::size_t obs_per_identity,
                      std::size_t num_cameras, Rng& rng, const std::string& key_prefix) {
  if (num_cameras == 0) throw std::invalid_argument("synth_dataset: need at least one camera");
  Dataset out;
  out.reserve(bank.num_identities * obs_per_identity);
  for (std::size_t id = 0; id < bank.num_identities; ++id) {
    for (std::size_t k = 0; k < obs_per_identity; ++k) {
      auto rec = sample_observation(bank, id, k % num_cameras, rng);
      std::ostringstream key;
      key << key_prefix << '_' << std::setw(4) << std::setfill('0') << id << "_c" << rec.camera
          << "_" << std::setw(3) << k;
      rec.image_key = key.str();
      out.push_back(std::move(rec));
    }
  }
  return out;
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

[[noreturn]] void line_error(const std::filesystem::path& path, std::size_t line,
                             const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

Dataset load_features(const std::filesystem::path& path) {
  auto in = open_input(path);
  Dataset out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    ObservationRecord rec;
    try {
      const json j = json::parse(text);
      rec.image_key = j.at("image_key").get<std::string>();
      const auto id = j.at("id").get<long long>();
      const auto cam = j.at("camera").get<long long>();
      if (id < 0 || cam < 0) line_error(path, line, "negative id or camera");
      rec.identity = static_cast<std::size_t>(id);
      rec.camera = static_cast<std::size_t>(cam);
      rec.features = j.at("features").get<std::vector<double>>();
    } catch (const json::exception& e) {
      line_error(path, line, std::string("malformed record: ") + e.what());
    }
    if (rec.features.empty()) line_error(path, line, "empty feature vector");
    for (double x : rec.features)
      if (!std::isfinite(x)) line_error(path, line, "non-finite feature value");
    if (!out.empty() && rec.features.size() != out.front().features.size())
      line_error(path, line, "feature dimension " + std::to_string(rec.features.size()) +
                                 " differs from " + std::to_string(out.front().features.size()));
    out.push_back(std::move(rec));
  }
  return out;
}

void attach_captions(Dataset& records, const std::filesystem::path& captions_path) {
  auto in = open_input(captions_path);
  std::unordered_map<std::string, std::string> captions;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(text);
      captions[j.at("image_key").get<std::string>()] = j.at("caption").get<std::string>();
    } catch (const json::exception& e) {
      line_error(captions_path, line, std::string("malformed record: ") + e.what());
    }
  }
  for (auto& rec : records) {
    const auto it = captions.find(rec.image_key);
    if (it == captions.end())
      throw DataError(captions_path.string() + ": no caption for image_key '" + rec.image_key + "'");
    rec.caption = it->second;
  }
}

Dataset load_dataset(const std::filesystem::path& features_path,
                     const std::filesystem::path& captions_path) {
  Dataset d = load_features(features_path);
  attach_captions(d, captions_path);
  return d;
}

void write_features(const std::filesystem::path& path, const Dataset& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    json j = {{"image_key", r.image_key},
              {"id", r.identity},
              {"camera", r.camera},
              {"features", r.features}};
    out << j.dump() << '\n';
  }
}

void write_captions(const std::filesystem::path& path, const Dataset& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records)
    out << json{{"image_key", r.image_key}, {"caption", r.caption}}.dump() << '\n';
}

}  // namespace hornet
