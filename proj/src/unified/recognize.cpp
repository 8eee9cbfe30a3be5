#include "s2da/unified/recognize.hpp"

#include <algorithm>

namespace s2da::unified {

namespace {

ad::Tensor rows_of(const std::vector<std::vector<double>>& rows, std::span<const std::size_t> idx) {
  const std::size_t d = rows.front().size();
  ad::Tensor t = ad::Tensor::zeros(idx.size(), d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(rows[idx[i]].begin(), rows[idx[i]].end(), t.row_span(i).begin());
  }
  return t;
}

DecodedSegment make_segment(const asr::Hypothesis& hyp, std::span<const std::size_t> positions) {
  DecodedSegment s;
  for (std::size_t p : positions) s.tokens.push_back(hyp.tokens[p]);
  s.features = rows_of(hyp.features, positions);
  return s;
}

/// The <eos> step (or the last step of a truncated hypothesis).
SplitResult empty_result(const asr::Hypothesis& hyp, bool had_boundary) {
  SplitResult r;
  r.had_boundary = had_boundary;
  r.empty_transcript = true;
  const std::size_t last[] = {hyp.tokens.size() - 1};
  DecodedSegment s = make_segment(hyp, last);
  s.tokens = {Vocabulary::kEos};
  r.segments.push_back(std::move(s));
  return r;
}

}  // namespace

SplitResult split_at_boundaries(const asr::Hypothesis& hyp) {
  SplitResult r;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < hyp.tokens.size(); ++i) {
    const TokenId t = hyp.tokens[i];
    if (t == Vocabulary::kEos) break;
    if (t == Vocabulary::kDaEnd) {
      r.had_boundary = true;
      if (!current.empty()) r.segments.push_back(make_segment(hyp, current));
      current.clear();
      continue;
    }
    current.push_back(i);
  }
  if (!current.empty()) r.segments.push_back(make_segment(hyp, current));
  if (r.segments.empty()) return empty_result(hyp, r.had_boundary);
  return r;
}

SplitResult whole_hypothesis(const asr::Hypothesis& hyp) {
  SplitResult r;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < hyp.tokens.size(); ++i) {
    const TokenId t = hyp.tokens[i];
    if (t == Vocabulary::kEos) break;
    if (t == Vocabulary::kDaEnd) {
      r.had_boundary = true;
      continue;
    }
    current.push_back(i);
  }
  if (current.empty()) return empty_result(hyp, r.had_boundary);
  r.segments.push_back(make_segment(hyp, current));
  return r;
}

nlohmann::json to_json(const RecognizedTurn& turn) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : turn.segments) {
    segs.push_back({{"words", s.words}, {"da_tag", s.da_tag}, {"posterior", s.posterior}});
  }
  return {{"turn_id", turn.turn_id},
          {"tokens", turn.tokens},
          {"segments", segs},
          {"had_boundary", turn.had_boundary},
          {"truncated", turn.truncated}};
}

RecognizedTurn recognized_turn_from_json(const nlohmann::json& j) {
  RecognizedTurn t;
  t.turn_id = j.at("turn_id").get<std::string>();
  t.tokens = j.value("tokens", std::vector<std::string>{});
  t.had_boundary = j.value("had_boundary", false);
  t.truncated = j.value("truncated", false);
  for (const auto& s : j.at("segments")) {
    RecognizedSegment seg;
    seg.words = s.at("words").get<std::vector<std::string>>();
    seg.da_tag = s.at("da_tag").get<std::string>();
    seg.posterior = s.value("posterior", 0.0);
    t.segments.push_back(std::move(seg));
  }
  return t;
}

da::SegmentInput segment_input(ad::Graph& g, const DecodedSegment& segment) {
  return {segment.tokens, g.constant(segment.features)};
}

ConversationRecognizer::ConversationRecognizer(const UnifiedModel& model, RecognizeOptions options)
    : model_(model), options_(options), context_(model.config().da.history) {}

RecognizedTurn ConversationRecognizer::recognize(const std::string& turn_id,
                                                 const ad::Tensor& frames) {
  asr::BeamOptions beam{options_.beam_width, options_.n_best, options_.length_penalty, 0};
  const auto hyps = model_.asr().beam_decode(frames, beam);
  const auto& da = model_.da();
  const std::size_t h = model_.config().da.history;
  auto split = [&](const asr::Hypothesis& hyp) {
    return options_.segment_at_boundaries ? split_at_boundaries(hyp) : whole_hypothesis(hyp);
  };

  const SplitResult best = split(hyps.front());
  const std::size_t K = best.segments.size();
  const auto previous = context_.window();

  // Per-segment posteriors of every hypothesis that agrees with the 1-best
  // on the number of segments.
  std::vector<std::vector<std::vector<double>>> dists(K);
  std::vector<double> scores;
  std::vector<ad::Var> best_encodings;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const SplitResult s = i == 0 ? best : split(hyps[i]);
    if (s.segments.size() != K) continue;
    scores.push_back(hyps[i].normalized_score);
    std::vector<ad::Var> window = previous;
    for (std::size_t k = 0; k < K; ++k) {
      const ad::Var enc = da.encode_segment(graph_, segment_input(graph_, s.segments[k]));
      if (i == 0) best_encodings.push_back(enc);
      window.push_back(enc);
      if (window.size() > h) window.erase(window.begin());
      const auto lp = ad::log_softmax(da.logits(graph_, window).value().data());
      std::vector<double> probs;
      for (double v : lp) probs.push_back(std::exp(v));
      dists[k].push_back(std::move(probs));
    }
  }
  for (const auto& enc : best_encodings) context_.push(enc);

  RecognizedTurn out;
  out.turn_id = turn_id;
  out.had_boundary = best.had_boundary;
  out.truncated = !hyps.front().complete;
  for (TokenId t : hyps.front().body()) out.tokens.push_back(model_.vocab().word(t));
  for (std::size_t k = 0; k < K; ++k) {
    const auto mix = da::combine_nbest(dists[k], scores);
    RecognizedSegment seg;
    if (!best.empty_transcript) {
      for (TokenId t : best.segments[k].tokens) seg.words.push_back(model_.vocab().word(t));
    }
    seg.da_tag = model_.tags().tag(mix.predicted);
    seg.posterior = mix.probs[static_cast<std::size_t>(mix.predicted)];
    seg.probs = mix.probs;
    out.segments.push_back(std::move(seg));
  }
  return out;
}

metrics::TaggedTurn gold_tagged_turn(const data::Utterance& unit, const Vocabulary& vocab,
                                     const TagSet& tags) {
  const auto words = unit.words();
  metrics::TaggedTurn out;
  for (const auto& s : unit.segments) {
    metrics::TaggedSegment seg;
    for (std::size_t i = s.begin; i < s.end; ++i) seg.words.push_back(vocab.word(words[i]));
    seg.tag = tags.tag(s.tag);
    out.push_back(std::move(seg));
  }
  return out;
}

metrics::TaggedTurn hypothesis_tagged_turn(const RecognizedTurn& turn) {
  metrics::TaggedTurn out;
  for (const auto& s : turn.segments) out.push_back({s.words, s.da_tag});
  return out;
}

Evaluation evaluate(const UnifiedModel& model, const std::vector<data::ConversationUnits>& units,
                    const RecognizeOptions& options) {
  Evaluation ev;
  for (const auto& conv : units) {
    ConversationRecognizer rec(model, options);
    for (const auto& unit : conv) {
      ev.turns.push_back(rec.recognize(unit.id, unit.frames));
      ev.report.add_turn(gold_tagged_turn(unit, model.vocab(), model.tags()),
                         hypothesis_tagged_turn(ev.turns.back()));
    }
  }
  return ev;
}

}  // namespace s2da::unified
