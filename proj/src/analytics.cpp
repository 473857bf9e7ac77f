#include "auditbot/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace auditbot {

bool Histogram::valid() const {
    if (edges.size() != probs.size() + 1 || probs.empty()) return false;
    if (!std::is_sorted(edges.begin(), edges.end())) return false;
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= 1e-9;
}

double psi(const Histogram& baseline, const Histogram& current) {
    if (baseline.edges != current.edges || baseline.probs.size() != current.probs.size()) {
        throw std::invalid_argument("psi requires identical histogram edges");
    }
    constexpr double eps = 1e-6;
    double total = 0.0;
    for (std::size_t i = 0; i < baseline.probs.size(); ++i) {
        const double p = baseline.probs[i];
        const double q = current.probs[i];
        total += (p - q) * std::log(std::max(p, eps) / std::max(q, eps));
    }
    return std::max(total, 0.0);
}

std::pair<Histogram, Histogram> histogram_from_samples(const std::vector<double>& baseline_samples,
                                                       const std::vector<double>& current_samples,
                                                       int bins) {
    if (baseline_samples.empty()) throw std::invalid_argument("empty baseline sample set");
    if (current_samples.empty()) throw std::invalid_argument("empty current sample set");
    if (bins < 2) throw std::invalid_argument("bins must be >= 2");

    std::vector<double> sorted = baseline_samples;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    std::vector<double> edges;
    edges.push_back(-std::numeric_limits<double>::infinity());
    for (int k = 1; k < bins; ++k) {
        edges.push_back(sorted[k * n / bins]);
    }
    edges.push_back(std::numeric_limits<double>::infinity());

    auto bin_samples = [&](const std::vector<double>& samples) {
        Histogram h;
        h.edges = edges;
        h.probs.assign(static_cast<std::size_t>(bins), 0.0);
        for (double v : samples) {
            // Left-closed right-open: the bin index counts inner edges <= v.
            const auto first = edges.begin() + 1;
            const auto last = edges.end() - 1;
            const std::size_t idx =
                static_cast<std::size_t>(std::upper_bound(first, last, v) - first);
            h.probs[idx] += 1.0;
        }
        for (double& p : h.probs) p /= static_cast<double>(samples.size());
        return h;
    };
    return {bin_samples(baseline_samples), bin_samples(current_samples)};
}

LexiconParseResult parse_lexicon(const std::string& text) {
    Lexicon lex;
    std::vector<Diagnostic> errors;
    std::set<std::string>* section = nullptr;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        if (line == "[masculine]") {
            section = &lex.masculine_coded;
            continue;
        }
        if (line == "[feminine]") {
            section = &lex.feminine_coded;
            continue;
        }
        if (line.front() == '[') {
            errors.push_back({line_no, 1, "unknown lexicon section " + line});
            continue;
        }
        if (section == nullptr) {
            errors.push_back({line_no, 1, "stem before any [masculine]/[feminine] section"});
            continue;
        }
        std::string stem;
        for (char c : line) stem += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        section->insert(stem);
    }
    for (const auto& stem : lex.masculine_coded) {
        if (lex.feminine_coded.count(stem)) {
            errors.push_back({0, 0, "stem '" + stem + "' appears in both sections"});
        }
    }
    if (!errors.empty()) return {std::nullopt, std::move(errors)};
    return {std::move(lex), {}};
}

LexiconScore lexicon_imbalance(const std::string& text, const Lexicon& lexicon) {
    LexiconScore score;
    auto matches = [](const std::string& token, const std::set<std::string>& stems) {
        for (const auto& stem : stems) {
            if (token.size() >= stem.size() && token.compare(0, stem.size(), stem) == 0)
                return true;
        }
        return false;
    };
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        if (matches(token, lexicon.masculine_coded)) {
            ++score.masculine;
        } else if (matches(token, lexicon.feminine_coded)) {
            ++score.feminine;
        }
        token.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            token += static_cast<char>(std::tolower(c));
        } else {
            flush();
        }
    }
    flush();
    score.imbalance = score.masculine - score.feminine;
    return score;
}

std::vector<std::pair<IsoWeek, double>> split_session_hours(TimeMs start, TimeMs end) {
    if (start > end) throw std::invalid_argument("session start is after end");
    std::vector<std::pair<IsoWeek, double>> pieces;
    TimeMs cur = start;
    while (cur < end) {
        const TimeMs week_end = iso_week_start(cur) + kMsPerWeek;
        const TimeMs piece_end = std::min(end, week_end);
        pieces.emplace_back(iso_week_of(civil_date_of(cur)),
                            static_cast<double>(piece_end - cur) / kMsPerHour);
        cur = piece_end;
    }
    if (pieces.empty()) {
        pieces.emplace_back(iso_week_of(civil_date_of(start)), 0.0);  // zero-length session
    }
    return pieces;
}

WeekLedger weekly_hours(const std::vector<SessionSpan>& sessions) {
    WeekLedger ledger;
    for (const auto& s : sessions) {
        for (const auto& [week, hours] : split_session_hours(s.start, s.end)) {
            ledger[WeekKey{s.actor, week}] += hours;
        }
    }
    return ledger;
}

}  // namespace auditbot
