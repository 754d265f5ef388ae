#include "covuln/assessment.hpp"

#include <sstream>

#include <spdlog/spdlog.h>

#include "covuln/digest.hpp"

namespace covuln {
namespace {

constexpr std::string_view kStoreFormat = "covuln-store/1";

nlohmann::json verdict_json(const std::optional<Verdict>& v) {
  return v ? nlohmann::json(to_canonical(*v)) : nlohmann::json(nullptr);
}

nlohmann::json text_json(const std::optional<std::string>& s) {
  return s ? nlohmann::json(*s) : nlohmann::json(nullptr);
}

ParsedReply reply_from_json(const nlohmann::json& c, const nlohmann::json& n) {
  ParsedReply r;
  if (!c.is_null()) {
    const auto v = from_canonical(c.get<std::int64_t>());
    if (!v) throw DataError("store: verdict must be 0, 1 or null");
    r.verdict = v;
  }
  if (!n.is_null()) r.description = n.get<std::string>();
  return r;
}

struct Loaded {
  StoreManifest manifest;
  std::map<SampleId, Assessment> records;
  bool torn = false;
};

Loaded read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open assessment store '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  Loaded out;
  std::size_t pos = 0;
  std::size_t lineno = 0;
  bool have_header = false;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = text.substr(pos, terminated ? nl - pos : std::string::npos);
    pos = terminated ? nl + 1 : text.size();
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      if (!terminated) {
        spdlog::warn("store '{}': dropping torn final line {}", path.string(), lineno);
        out.torn = true;
        break;
      }
      throw DataError("store '" + path.string() + "' line " + std::to_string(lineno) +
                      ": invalid JSON");
    }
    try {
      if (!have_header) {
        const auto& m = j.at("manifest");
        if (m.at("format").get<std::string>() != kStoreFormat) {
          throw DataError("store '" + path.string() + "': unknown format");
        }
        out.manifest.config = m.at("config");
        out.manifest.template_version = m.at("template_version").get<std::string>();
        if (m.at("config_digest").get<std::string>() != out.manifest.config_digest()) {
          throw DataError("store '" + path.string() + "': header digest does not match its config");
        }
        have_header = true;
        continue;
      }
      auto a = assessment_from_json(j);
      if (!out.records.emplace(a.id, std::move(a)).second) {
        throw DataError("store '" + path.string() + "': duplicate idx on line " +
                        std::to_string(lineno));
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("store '" + path.string() + "' line " + std::to_string(lineno) + ": " +
                      e.what());
    }
  }
  if (!have_header) throw DataError("store '" + path.string() + "' has no manifest header");
  return out;
}

}  // namespace

std::string_view to_string(HintMode mode) noexcept {
  switch (mode) {
    case HintMode::Detector: return "detector";
    case HintMode::None: return "none";
    case HintMode::AlwaysYes: return "always_yes";
    case HintMode::AlwaysNo: return "always_no";
  }
  return "?";
}

HintMode parse_hint_mode(std::string_view text) {
  if (text == "detector") return HintMode::Detector;
  if (text == "none") return HintMode::None;
  if (text == "always_yes") return HintMode::AlwaysYes;
  if (text == "always_no") return HintMode::AlwaysNo;
  throw ContractError("unknown hint mode '" + std::string(text) +
                      "' (expected detector, none, always_yes or always_no)");
}

nlohmann::json to_json(const Assessment& a) {
  return {{"idx", a.id},
          {"z", to_canonical(a.detector.verdict)},
          {"z_score", a.detector.score},
          {"c1", verdict_json(a.llm_initial.verdict)},
          {"n1", text_json(a.llm_initial.description)},
          {"c2", verdict_json(a.llm_final.verdict)},
          {"n2", text_json(a.llm_final.description)},
          {"refined", a.refined},
          {"hint_mode", to_string(a.hint_mode)},
          {"prompt_hash", a.prompt_hash}};
}

Assessment assessment_from_json(const nlohmann::json& j) {
  Assessment a;
  a.id = j.at("idx").get<SampleId>();
  const auto z = from_canonical(j.at("z").get<std::int64_t>());
  if (!z) throw DataError("store: z must be 0 or 1");
  a.detector = {*z, j.at("z_score").get<double>()};
  a.llm_initial = reply_from_json(j.at("c1"), j.at("n1"));
  a.llm_final = reply_from_json(j.at("c2"), j.at("n2"));
  a.refined = j.at("refined").get<bool>();
  a.hint_mode = parse_hint_mode(j.at("hint_mode").get<std::string>());
  a.prompt_hash = j.at("prompt_hash").get<std::string>();
  return a;
}

std::string StoreManifest::config_digest() const {
  return json_digest({{"config", config}, {"template_version", template_version}});
}

nlohmann::json StoreManifest::to_json() const {
  return {{"manifest",
           {{"format", kStoreFormat},
            {"config", config},
            {"config_digest", config_digest()},
            {"template_version", template_version}}}};
}

AssessmentStore::AssessmentStore(StoreManifest manifest) : manifest_(std::move(manifest)) {}

AssessmentStore::AssessmentStore(AssessmentStore&& other) noexcept
    : manifest_(std::move(other.manifest_)),
      path_(std::move(other.path_)),
      records_(std::move(other.records_)),
      out_(std::move(other.out_)) {}

AssessmentStore AssessmentStore::load(const std::filesystem::path& path) {
  auto loaded = read_store(path);
  AssessmentStore store(std::move(loaded.manifest));
  store.records_ = std::move(loaded.records);
  return store;
}

AssessmentStore AssessmentStore::open(const std::filesystem::path& path, StoreManifest manifest) {
  AssessmentStore store(std::move(manifest));
  store.path_ = path;
  if (std::filesystem::exists(path)) {
    auto loaded = read_store(path);
    if (loaded.manifest.config_digest() != store.manifest_.config_digest()) {
      throw StaleStoreError("store '" + path.string() +
                            "' was produced with a different configuration (digest " +
                            loaded.manifest.config_digest().substr(0, 12) + " vs " +
                            store.manifest_.config_digest().substr(0, 12) +
                            "); use a new --store path");
    }
    store.records_ = std::move(loaded.records);
    if (loaded.torn) store.compact();
  } else {
    std::ofstream create(path, std::ios::binary | std::ios::trunc);
    if (!create) throw DataError("cannot create assessment store '" + path.string() + "'");
    create << canonical_json(store.manifest_.to_json()) << '\n';
  }
  store.out_.open(path, std::ios::binary | std::ios::app);
  if (!store.out_) throw DataError("cannot append to assessment store '" + path.string() + "'");
  return store;
}

bool AssessmentStore::contains(SampleId id) const {
  std::lock_guard lock(mu_);
  return records_.contains(id);
}

std::optional<Assessment> AssessmentStore::find(SampleId id) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::size_t AssessmentStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::vector<SampleId> AssessmentStore::ids() const {
  std::lock_guard lock(mu_);
  std::vector<SampleId> out;
  out.reserve(records_.size());
  for (const auto& [id, _] : records_) out.push_back(id);
  return out;
}

void AssessmentStore::append(const Assessment& a) {
  if (a.status != AssessmentStatus::Complete) {
    throw ContractError("only complete assessments are stored (sample " + std::to_string(a.id) + ")");
  }
  std::lock_guard lock(mu_);
  Assessment copy = a;
  copy.phase1.reset();
  copy.error.clear();
  if (!records_.emplace(a.id, std::move(copy)).second) {
    throw ContractError("store already holds an assessment for sample " + std::to_string(a.id));
  }
  if (out_.is_open()) {
    out_ << canonical_json(to_json(a)) << '\n';
    out_.flush();
  }
}

std::string AssessmentStore::serialize() const {
  std::lock_guard lock(mu_);
  std::string out = canonical_json(manifest_.to_json());
  out += '\n';
  for (const auto& [_, a] : records_) {
    out += canonical_json(to_json(a));
    out += '\n';
  }
  return out;
}

void AssessmentStore::compact() {
  if (!path_) return;
  const auto text = serialize();
  std::lock_guard lock(mu_);
  const auto tmp = std::filesystem::path(path_->string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << text;
  }
  const bool reopen = out_.is_open();
  if (reopen) out_.close();
  std::filesystem::rename(tmp, *path_);
  if (reopen) out_.open(*path_, std::ios::binary | std::ios::app);
}

}  // namespace covuln
