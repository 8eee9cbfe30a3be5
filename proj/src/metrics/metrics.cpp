#include "s2da/metrics/metrics.hpp"

#include <cstdio>
#include <limits>
#include <stdexcept>

namespace s2da::metrics {

std::vector<std::string> strip_boundaries(std::span<const std::string> words) {
  std::vector<std::string> out;
  for (const auto& w : words) {
    if (w != kBoundarySymbol) out.push_back(w);
  }
  return out;
}

double wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  MetricReport r;
  r.add_wer(ref, hyp);
  return r.wer->percent();
}

double ler(std::span<const std::string> gold, std::span<const std::string> predicted) {
  MetricReport r;
  r.add_ler(gold, predicted);
  return r.ler->percent();
}

double ser_distance(const BoundarySet& gold, const BoundarySet& predicted) {
  if (gold.empty() || predicted.empty()) {
    throw std::invalid_argument("ser_distance: boundary sets must be non-empty");
  }
  auto one_way = [](const BoundarySet& from, const BoundarySet& to) {
    double total = 0;
    for (std::size_t x : from) {
      std::size_t best = std::numeric_limits<std::size_t>::max();
      for (std::size_t y : to) best = std::min(best, x > y ? x - y : y - x);
      total += static_cast<double>(best);
    }
    return total;
  };
  return 0.5 * (one_way(gold, predicted) + one_way(predicted, gold));
}

double nser(std::size_t gold_count, std::size_t predicted_count) {
  MetricReport r;
  r.add_nser(gold_count, predicted_count);
  return r.nser->percent();
}

std::vector<std::string> expand_tags(const TaggedTurn& turn) {
  std::vector<std::string> out;
  for (const auto& seg : turn) {
    if (seg.tag.empty()) throw std::invalid_argument("daer: untagged segment");
    for (const auto& w : seg.words) {
      if (w != kBoundarySymbol) out.push_back(seg.tag);
    }
  }
  return out;
}

BoundarySet boundaries_of(const TaggedTurn& turn) {
  BoundarySet out;
  std::size_t words = 0;
  for (const auto& seg : turn) {
    for (const auto& w : seg.words) words += w != kBoundarySymbol;
    const std::size_t end = words == 0 ? 0 : words - 1;
    if (out.empty() || out.back() != end) out.push_back(end);
  }
  return out;
}

double daer(const TaggedTurn& gold, const TaggedTurn& hypothesis) {
  MetricReport r;
  r.add_daer(gold, hypothesis);
  return r.daer->percent();
}

void MetricReport::add_wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const auto r = strip_boundaries(ref);
  const auto h = strip_boundaries(hyp);
  if (r.empty()) throw std::invalid_argument("wer: empty reference");
  if (!wer) wer.emplace();
  wer->add(static_cast<double>(edit_distance(r, h)), static_cast<double>(r.size()));
}

void MetricReport::add_ler(std::span<const std::string> gold,
                           std::span<const std::string> predicted) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("ler: " + std::to_string(gold.size()) + " gold tags but " +
                                std::to_string(predicted.size()) + " predicted");
  }
  if (!ler) ler.emplace();
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) wrong += gold[i] != predicted[i];
  ler->add(static_cast<double>(wrong), static_cast<double>(gold.size()));
}

void MetricReport::add_ser(const BoundarySet& gold, const BoundarySet& predicted,
                           std::size_t gold_words) {
  if (gold_words == 0) throw std::invalid_argument("ser: gold turn has no words");
  if (!ser) ser.emplace();
  ser->add(ser_distance(gold, predicted), static_cast<double>(gold_words));
}

void MetricReport::add_nser(std::size_t gold_count, std::size_t predicted_count) {
  if (gold_count == 0) throw std::invalid_argument("nser: gold segment count is zero");
  if (!nser) nser.emplace();
  const double diff = gold_count > predicted_count ? static_cast<double>(gold_count - predicted_count)
                                                   : static_cast<double>(predicted_count - gold_count);
  nser->add(diff, static_cast<double>(gold_count));
}

void MetricReport::add_daer(const TaggedTurn& gold, const TaggedTurn& hypothesis) {
  const auto g = expand_tags(gold);
  const auto h = expand_tags(hypothesis);
  if (g.empty()) throw std::invalid_argument("daer: empty gold turn");
  if (!daer) daer.emplace();
  daer->add(static_cast<double>(edit_distance(g, h)), static_cast<double>(g.size()));
}

void MetricReport::add_turn(const TaggedTurn& gold, const TaggedTurn& hypothesis) {
  std::vector<std::string> ref, hyp, gold_tags, hyp_tags;
  for (const auto& s : gold) {
    ref.insert(ref.end(), s.words.begin(), s.words.end());
    gold_tags.push_back(s.tag);
  }
  for (const auto& s : hypothesis) {
    hyp.insert(hyp.end(), s.words.begin(), s.words.end());
    hyp_tags.push_back(s.tag);
  }
  add_wer(ref, hyp);
  if (gold.size() == hypothesis.size()) {
    add_ler(gold_tags, hyp_tags);
  } else {
    if (!ler) ler.emplace();
    ++ler_skipped_turns;
  }
  BoundarySet predicted = boundaries_of(hypothesis);
  if (predicted.empty()) predicted.push_back(0);
  add_ser(boundaries_of(gold), predicted, strip_boundaries(ref).size());
  add_nser(gold.size(), hypothesis.size());
  add_daer(gold, hypothesis);
}

namespace {

const std::pair<const char*, std::optional<Counts> MetricReport::*> kFields[] = {
    {"wer", &MetricReport::wer},
    {"ler", &MetricReport::ler},
    {"ser", &MetricReport::ser},
    {"nser", &MetricReport::nser},
    {"daer", &MetricReport::daer}};

}  // namespace

nlohmann::json to_json(const MetricReport& report) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, field] : kFields) {
    const auto& c = report.*field;
    if (!c) continue;
    j[name] = {{"percent", c->percent()},
               {"numerator", c->numerator},
               {"denominator", c->denominator}};
  }
  if (report.ler) j["ler"]["skipped_turns"] = report.ler_skipped_turns;
  return j;
}

MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  for (const auto& [name, field] : kFields) {
    if (!j.contains(name)) continue;
    const auto& m = j.at(name);
    r.*field = Counts{m.at("numerator").get<double>(), m.at("denominator").get<double>()};
  }
  if (j.contains("ler")) r.ler_skipped_turns = j["ler"].value("skipped_turns", std::size_t{0});
  return r;
}

std::string format_table(const MetricReport& report) {
  std::string out = "metric        value    numerator  denominator\n";
  char line[128];
  for (const auto& [name, field] : kFields) {
    const auto& c = report.*field;
    if (!c) continue;
    std::snprintf(line, sizeof(line), "%-8s %10.2f %12.2f %12.0f\n", name, c->percent(),
                  c->numerator, c->denominator);
    out += line;
  }
  if (report.ler && report.ler_skipped_turns > 0) {
    out += "(LER skipped " + std::to_string(report.ler_skipped_turns) +
           " turns with a different segment count)\n";
  }
  return out;
}

}  // namespace s2da::metrics
