#pragma once

// Corpus file format: one lead sheet per JSON file, written canonically
// (fixed field order, one event per line) so files are byte-reproducible.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "variata/errors.hpp"
#include "variata/notation.hpp"

namespace variata {

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path.string() + ": cannot open for writing");
  out << text;
}

/// Field accessor that reports the JSON pointer of whatever is missing or mistyped.
class FieldReader {
 public:
  FieldReader(std::string source, const nlohmann::json& root) : source_(std::move(source)), root_(root) {}

  const nlohmann::json& at(const nlohmann::json& obj, const std::string& key, const std::string& where) const {
    if (!obj.is_object()) fail(where, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(where + "/" + key, "missing field");
    return *it;
  }

  int integer(const nlohmann::json& v, const std::string& where) const {
    if (!v.is_number_integer()) fail(where, "expected an integer");
    return v.get<int>();
  }

  double real(const nlohmann::json& v, const std::string& where) const {
    if (!v.is_number()) fail(where, "expected a number");
    return v.get<double>();
  }

  std::string string(const nlohmann::json& v, const std::string& where) const {
    if (!v.is_string()) fail(where, "expected a string");
    return v.get<std::string>();
  }

  const nlohmann::json& array(const nlohmann::json& v, const std::string& where) const {
    if (!v.is_array()) fail(where, "expected an array");
    return v;
  }

  [[noreturn]] void fail(const std::string& where, const std::string& what) const {
    throw ParseError(source_ + ": field " + (where.empty() ? "/" : where) + ": " + what);
  }

  const nlohmann::json& root() const { return root_; }

 private:
  std::string source_;
  const nlohmann::json& root_;
};

inline nlohmann::json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source + ": byte offset " + std::to_string(e.byte) + ": " + e.what());
  }
}

}  // namespace detail

inline LeadSheet lead_sheet_from_json(const nlohmann::json& j, const std::string& source) {
  detail::FieldReader r(source, j);
  LeadSheet sheet;
  sheet.title = r.string(r.at(j, "title", ""), "/title");
  sheet.beats_per_bar = r.integer(r.at(j, "beats_per_bar", ""), "/beats_per_bar");
  sheet.pickup_ticks = r.integer(r.at(j, "pickup_ticks", ""), "/pickup_ticks");

  const auto& chords = r.array(r.at(j, "chords", ""), "/chords");
  for (std::size_t i = 0; i < chords.size(); ++i) {
    const std::string where = "/chords/" + std::to_string(i);
    ChordEvent c;
    c.root = r.integer(r.at(chords[i], "root", where), where + "/root");
    const std::string q = r.string(r.at(chords[i], "quality", where), where + "/quality");
    auto quality = parse_quality(q);
    if (!quality) r.fail(where + "/quality", "unknown chord quality '" + q + "'");
    c.quality = *quality;
    c.ticks = r.integer(r.at(chords[i], "ticks", where), where + "/ticks");
    sheet.chords.push_back(c);
  }

  const auto& melody = r.array(r.at(j, "melody", ""), "/melody");
  for (std::size_t i = 0; i < melody.size(); ++i) {
    const std::string where = "/melody/" + std::to_string(i);
    Note n;
    const auto& pitch = r.at(melody[i], "pitch", where);
    if (pitch.is_string()) {
      if (pitch.get<std::string>() != "rest") r.fail(where + "/pitch", "expected 0-127 or \"rest\"");
      n.pitch = kRest;
    } else {
      n.pitch = r.integer(pitch, where + "/pitch");
      if (n.pitch < 0 || n.pitch > kMaxPitch) r.fail(where + "/pitch", "pitch outside 0-127");
    }
    n.ticks = r.integer(r.at(melody[i], "ticks", where), where + "/ticks");
    sheet.melody.notes.push_back(n);
  }

  try {
    validate(sheet);
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return sheet;
}

inline LeadSheet parse_lead_sheet(const std::string& text, const std::string& source = "<memory>") {
  return lead_sheet_from_json(detail::parse_json_text(text, source), source);
}

inline LeadSheet load_lead_sheet(const std::filesystem::path& path) {
  return parse_lead_sheet(detail::read_file(path), path.string());
}

/// Canonical text form of a lead sheet.
inline std::string serialize(const LeadSheet& sheet) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"title\": " << nlohmann::json(sheet.title).dump() << ",\n";
  os << "  \"beats_per_bar\": " << sheet.beats_per_bar << ",\n";
  os << "  \"pickup_ticks\": " << sheet.pickup_ticks << ",\n";
  os << "  \"chords\": [";
  for (std::size_t i = 0; i < sheet.chords.size(); ++i) {
    const ChordEvent& c = sheet.chords[i];
    os << (i ? ",\n" : "\n") << "    {\"root\": " << c.root << ", \"quality\": \"" << to_string(c.quality)
       << "\", \"ticks\": " << c.ticks << "}";
  }
  os << (sheet.chords.empty() ? "],\n" : "\n  ],\n");
  os << "  \"melody\": [";
  for (std::size_t i = 0; i < sheet.melody.size(); ++i) {
    const Note& n = sheet.melody[i];
    os << (i ? ",\n" : "\n") << "    {\"pitch\": ";
    if (n.is_rest()) {
      os << "\"rest\"";
    } else {
      os << n.pitch;
    }
    os << ", \"ticks\": " << n.ticks << "}";
  }
  os << (sheet.melody.empty() ? "]\n" : "\n  ]\n");
  os << "}\n";
  return os.str();
}

inline void save_lead_sheet(const std::filesystem::path& path, const LeadSheet& sheet) {
  detail::write_file(path, serialize(sheet));
}

/// Loads every `*.json` file of a directory, in filename order.
inline std::vector<LeadSheet> load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ParseError(dir.string() + ": not a corpus directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<LeadSheet> corpus;
  corpus.reserve(files.size());
  for (const auto& f : files) corpus.push_back(load_lead_sheet(f));
  return corpus;
}

}  // namespace variata
