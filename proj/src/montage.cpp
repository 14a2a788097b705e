#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "brainalign/dataset.hpp"
#include "csv.hpp"

namespace brainalign {

const char* to_string(Region region) noexcept {
  switch (region) {
    case Region::Frontal: return "Frontal";
    case Region::Central: return "Central";
    case Region::Parietal: return "Parietal";
    case Region::Occipital: return "Occipital";
    case Region::Other: return "Other";
  }
  return "Other";
}

Region region_from_string(const std::string& name) {
  for (Region r : {Region::Frontal, Region::Central, Region::Parietal, Region::Occipital, Region::Other})
    if (name == to_string(r)) return r;
  throw Error(ErrorKind::Format, "BAD_REGION", "unknown region '" + name + "'");
}

Region region_from_channel_name(const std::string& channel) {
  std::string up;
  for (char c : channel) {
    if (std::isalpha(static_cast<unsigned char>(c))) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    else break;
  }
  // "Z" marks midline (Fz, Cz ...), not a region letter.
  if (!up.empty() && up.back() == 'Z') up.pop_back();
  auto starts = [&](const char* p) { return up.rfind(p, 0) == 0; };
  if (starts("FT") || starts("TP") || starts("T")) return Region::Other;
  if (starts("FC")) return Region::Central;
  if (starts("CP")) return Region::Parietal;
  if (starts("PO")) return Region::Occipital;
  if (starts("FP") || starts("AF") || starts("F")) return Region::Frontal;
  if (starts("C")) return Region::Central;
  if (starts("P")) return Region::Parietal;
  if (starts("O")) return Region::Occipital;
  return Region::Other;
}

const MontageEntry* Montage::find(const std::string& channel) const {
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const MontageEntry& e) { return e.channel == channel; });
  return it == entries.end() ? nullptr : &*it;
}

void Montage::validate() const {
  for (const auto& e : entries) {
    if (!(std::abs(e.x) <= 1.0 && std::abs(e.y) <= 1.0))
      throw Error(ErrorKind::Validation, "INVALID_MONTAGE",
                  "montage: channel " + e.channel + " lies outside [-1, 1]^2");
  }
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t j = i + 1; j < entries.size(); ++j)
      if (entries[i].channel == entries[j].channel)
        throw Error(ErrorKind::Validation, "DUPLICATE_ID", "montage: channel " + entries[i].channel + " listed twice");
}

Montage Montage::builtin() {
  // Left hemisphere and midline; right-hemisphere entries mirror odd-numbered
  // sites to the next even number.
  struct Site {
    const char* name;
    double x, y;
  };
  static constexpr Site kSites[] = {
      {"Fp1", -0.25, 0.77}, {"Fpz", 0.0, 0.80},
      {"AF7", -0.47, 0.65}, {"AF3", -0.20, 0.60}, {"AFz", 0.0, 0.60},
      {"F7", -0.65, 0.47},  {"F5", -0.50, 0.42},  {"F3", -0.33, 0.40}, {"F1", -0.16, 0.40}, {"Fz", 0.0, 0.40},
      {"FT9", -0.90, 0.30}, {"FT7", -0.76, 0.25}, {"FC5", -0.55, 0.20}, {"FC3", -0.37, 0.20},
      {"FC1", -0.18, 0.20}, {"FCz", 0.0, 0.20},
      {"T7", -0.80, 0.0},   {"C5", -0.60, 0.0},   {"C3", -0.40, 0.0},  {"C1", -0.20, 0.0},  {"Cz", 0.0, 0.0},
      {"TP9", -0.90, -0.30}, {"TP7", -0.76, -0.25}, {"CP5", -0.55, -0.20}, {"CP3", -0.37, -0.20},
      {"CP1", -0.18, -0.20}, {"CPz", 0.0, -0.20},
      {"P7", -0.65, -0.47}, {"P5", -0.50, -0.42}, {"P3", -0.33, -0.40}, {"P1", -0.16, -0.40}, {"Pz", 0.0, -0.40},
      {"PO7", -0.47, -0.65}, {"PO3", -0.20, -0.60}, {"POz", 0.0, -0.60},
      {"O1", -0.25, -0.77}, {"Oz", 0.0, -0.80}, {"Iz", 0.0, -0.95},
  };
  Montage m;
  for (const auto& s : kSites) {
    std::string name = s.name;
    m.entries.push_back({name, s.x, s.y, region_from_channel_name(name)});
    if (std::isdigit(static_cast<unsigned char>(name.back()))) {
      const auto digits = name.find_first_of("0123456789");
      const int number = std::stoi(name.substr(digits));
      std::string mirrored = name.substr(0, digits) + std::to_string(number + 1);
      m.entries.push_back({mirrored, -s.x, s.y, region_from_channel_name(mirrored)});
    }
  }
  return m;
}

Montage Montage::read_csv(const std::filesystem::path& path) {
  const auto table = detail::read_csv(path, {"channel", "x", "y", "region"});
  Montage m;
  for (const auto& row : table.rows) {
    const std::string ctx = path.string() + " channel " + row[0];
    m.entries.push_back({row[0], detail::parse_double(row[1], ctx), detail::parse_double(row[2], ctx),
                         region_from_string(row[3])});
  }
  m.validate();
  return m;
}

void Montage::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "IO", "cannot write " + path.string());
  out << "channel,x,y,region\n";
  for (const auto& e : entries)
    out << e.channel << ',' << detail::format_double(e.x) << ',' << detail::format_double(e.y) << ','
        << to_string(e.region) << '\n';
}

CategoryLabels CategoryLabels::read_csv(const std::filesystem::path& path) {
  const auto table = detail::read_csv(path, {"stimulus_id", "category"});
  CategoryLabels labels;
  for (const auto& row : table.rows) {
    if (!labels.by_stimulus.emplace(row[0], row[1]).second)
      throw Error(ErrorKind::Validation, "DUPLICATE_ID", path.string() + ": stimulus " + row[0] + " labelled twice");
    if (std::find(labels.categories.begin(), labels.categories.end(), row[1]) == labels.categories.end())
      labels.categories.push_back(row[1]);
  }
  return labels;
}

void CategoryLabels::write_csv(const std::filesystem::path& path, const std::vector<std::string>& id_order) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "IO", "cannot write " + path.string());
  out << "stimulus_id,category\n";
  for (const auto& id : id_order) {
    auto it = by_stimulus.find(id);
    if (it != by_stimulus.end()) out << id << ',' << it->second << '\n';
  }
}

}  // namespace brainalign
