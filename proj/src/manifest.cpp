#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "attrib/corpus.hpp"
#include "attrib/error.hpp"
#include "attrib/image_io.hpp"

namespace attrib {

std::string_view to_string(Label label) noexcept { return label == Label::Positive ? "positive" : "negative"; }

std::string_view to_string(Certainty certainty) noexcept {
  return certainty == Certainty::Certain1 ? "1" : "disputed";
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Label parse_label(std::string_view text) {
  if (text == "positive") return Label::Positive;
  if (text == "negative") return Label::Negative;
  throw Error(ErrorCode::MalformedManifest, "label must be positive|negative, got '" + std::string(text) + "'");
}

Certainty parse_certainty(std::string_view text) {
  if (text == "1") return Certainty::Certain1;
  if (text == "disputed") return Certainty::Disputed;
  throw Error(ErrorCode::MalformedManifest, "certainty must be 1|disputed, got '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw Error(ErrorCode::InvalidArgument, "unknown split '" + std::string(text) + "'");
}

namespace {

const std::vector<std::string> kRequiredColumns{"artwork_id", "title", "label", "certainty", "image_path", "px_per_mm"};

// RFC 4180 style: quoted fields may contain commas, newlines and doubled quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  size_t i = 0;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) i = 3;
  for (; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        break;
      default:
        field += ch;
        any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::MalformedManifest, "unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_positive_real(const std::string& text, const std::string& what) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(value > 0.0))
    throw Error(ErrorCode::MalformedManifest, what + " must be a positive number, got '" + text + "'");
  return value;
}

int parse_positive_int(const std::string& text, const std::string& what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 1)
    throw Error(ErrorCode::MalformedManifest, what + " must be a positive integer, got '" + text + "'");
  return value;
}

struct RawRow {
  std::string artwork_id, title, label, certainty, image_path, px_per_mm;
  std::optional<std::string> width_px, height_px;
};

std::vector<RawRow> rows_from_csv(const std::string& text) {
  auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorCode::MalformedManifest, "missing header");
  const auto& header = rows.front();
  const bool with_dims = header.size() == kRequiredColumns.size() + 2;
  if (header.size() != kRequiredColumns.size() && !with_dims)
    throw Error(ErrorCode::MalformedManifest, "unexpected header column count");
  for (size_t i = 0; i < kRequiredColumns.size(); ++i)
    if (header[i] != kRequiredColumns[i])
      throw Error(ErrorCode::MalformedManifest, "header column " + std::to_string(i) + " must be " + kRequiredColumns[i]);
  if (with_dims && (header[6] != "width_px" || header[7] != "height_px"))
    throw Error(ErrorCode::MalformedManifest, "optional columns must be width_px,height_px");

  std::vector<RawRow> out;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw Error(ErrorCode::MalformedManifest, "row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                                                    " fields, expected " + std::to_string(header.size()));
    RawRow raw{row[0], row[1], row[2], row[3], row[4], row[5], std::nullopt, std::nullopt};
    if (with_dims) {
      raw.width_px = row[6];
      raw.height_px = row[7];
    }
    out.push_back(std::move(raw));
  }
  return out;
}

std::string json_scalar(const nlohmann::json& value, const std::string& key) {
  if (!value.contains(key)) throw Error(ErrorCode::MalformedManifest, "missing field '" + key + "'");
  const auto& v = value.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw Error(ErrorCode::MalformedManifest, "field '" + key + "' must be a string or number");
}

std::vector<RawRow> rows_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedManifest, e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::MalformedManifest, "JSON manifest must be an array");
  std::vector<RawRow> out;
  for (const auto& item : doc) {
    if (!item.is_object()) throw Error(ErrorCode::MalformedManifest, "JSON manifest entries must be objects");
    RawRow raw{json_scalar(item, "artwork_id"), json_scalar(item, "title"),     json_scalar(item, "label"),
               json_scalar(item, "certainty"),  json_scalar(item, "image_path"), json_scalar(item, "px_per_mm"),
               std::nullopt,                    std::nullopt};
    if (item.contains("width_px") || item.contains("height_px")) {
      raw.width_px = json_scalar(item, "width_px");
      raw.height_px = json_scalar(item, "height_px");
    }
    out.push_back(std::move(raw));
  }
  return out;
}

std::string quote_csv(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::vector<ArtworkRecord> load_manifest(const std::filesystem::path& path, const std::filesystem::path& image_root) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  const auto first = text.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
  const bool is_json = first != std::string::npos && text[first] == '[';
  const auto rows = is_json ? rows_from_json(text) : rows_from_csv(text);

  const std::filesystem::path root = image_root.empty() ? path.parent_path() : image_root;
  std::set<std::string> seen;
  std::vector<ArtworkRecord> records;
  records.reserve(rows.size());
  for (const auto& raw : rows) {
    if (raw.artwork_id.empty()) throw Error(ErrorCode::MalformedManifest, "empty artwork_id");
    if (!seen.insert(raw.artwork_id).second) throw Error(ErrorCode::DuplicateId, raw.artwork_id);
    ArtworkRecord rec;
    rec.artwork_id = raw.artwork_id;
    rec.title = raw.title;
    rec.label = parse_label(raw.label);
    rec.certainty = parse_certainty(raw.certainty);
    rec.px_per_mm = parse_positive_real(raw.px_per_mm, "px_per_mm");
    const std::filesystem::path image(raw.image_path);
    rec.image_path = image.is_absolute() ? image : root / image;
    if (!std::filesystem::exists(rec.image_path))
      throw Error(ErrorCode::MissingImageFile, raw.artwork_id + ": " + rec.image_path.string());
    if (raw.width_px && raw.height_px) {
      rec.width_px = parse_positive_int(*raw.width_px, "width_px");
      rec.height_px = parse_positive_int(*raw.height_px, "height_px");
    } else {
      std::tie(rec.width_px, rec.height_px) = read_image_size(rec.image_path);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_manifest_csv(const std::filesystem::path& path, std::span<const ArtworkRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write manifest " + path.string());
  out << "artwork_id,title,label,certainty,image_path,px_per_mm,width_px,height_px\n";
  for (const auto& r : records) {
    out << quote_csv(r.artwork_id) << ',' << quote_csv(r.title) << ',' << to_string(r.label) << ','
        << to_string(r.certainty) << ',' << quote_csv(r.image_path.string()) << ',' << r.px_per_mm << ','
        << r.width_px << ',' << r.height_px << '\n';
  }
}

}  // namespace attrib
