#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "auditbot/time.hpp"
#include "auditbot/value.hpp"

namespace auditbot {

struct Histogram {
    std::vector<double> edges;  // ascending; len(probs) + 1
    std::vector<double> probs;  // non-negative, sums to 1 within 1e-9

    bool valid() const;
};

// Population stability index: sum of (p - q) * ln(p/q) with each prob
// floored at 1e-6 inside the ratio. Symmetric, >= 0, zero on identical
// distributions. Throws std::invalid_argument on mismatched edges.
double psi(const Histogram& baseline, const Histogram& current);

// Bins both sample sets onto baseline equal-count quantile edges (outer
// edges at +/-infinity, left-closed right-open bins).
std::pair<Histogram, Histogram> histogram_from_samples(const std::vector<double>& baseline_samples,
                                                       const std::vector<double>& current_samples,
                                                       int bins = 10);

struct Lexicon {
    std::set<std::string> masculine_coded;
    std::set<std::string> feminine_coded;
};

struct LexiconParseResult {
    std::optional<Lexicon> lexicon;
    std::vector<Diagnostic> errors;
    bool ok() const { return lexicon.has_value(); }
};

// Plain text, one stem per line, sections "[masculine]" / "[feminine]",
// '#' comments. The two sets must be disjoint.
LexiconParseResult parse_lexicon(const std::string& text);

struct LexiconScore {
    int masculine = 0;
    int feminine = 0;
    int imbalance = 0;  // masculine - feminine
};

// Lowercases, splits on non-alphanumerics; a token counts for a stem when
// it starts with that stem; each token counted once, masculine first.
LexiconScore lexicon_imbalance(const std::string& text, const Lexicon& lexicon);

struct SessionSpan {
    std::string actor;
    TimeMs start = 0;
    TimeMs end = 0;
    std::uint64_t seq = 0;  // originating event, 0 when synthetic
};

struct WeekKey {
    std::string actor;
    IsoWeek week;

    auto operator<=>(const WeekKey&) const = default;
};

// Total hours per (actor, ISO week); sessions split at week boundaries.
using WeekLedger = std::map<WeekKey, double>;

WeekLedger weekly_hours(const std::vector<SessionSpan>& sessions);

// Pieces of one session after splitting at ISO-week boundaries.
std::vector<std::pair<IsoWeek, double>> split_session_hours(TimeMs start, TimeMs end);

}  // namespace auditbot
