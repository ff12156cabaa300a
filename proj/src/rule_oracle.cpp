// Brute-force reference for the rule engine. Every verdict is recomputed
// from scratch by scanning the list; nothing is carried between packets.

#include <algorithm>

#include "mcguard/rulekit.hpp"

namespace mcguard {

namespace {

Outcome ok_if(bool compliant) { return compliant ? Outcome::Compliant : Outcome::Anomalous; }

const std::string& identity(const Message& m) {
    return m.index() == 0 ? std::get<GooseMessage>(m).goid : std::get<SvMessage>(m).svid;
}

// Indices of earlier packets of the same protocol and stream, oldest first.
std::vector<size_t> history(std::span<const Message> ms, size_t i) {
    std::vector<size_t> h;
    for (size_t j = 0; j < i; ++j)
        if (ms[j].index() == ms[i].index() && stream_key_of(ms[j]) == stream_key_of(ms[i])) h.push_back(j);
    return h;
}

bool identity_reused_elsewhere(std::span<const Message> ms, size_t i) {
    for (size_t j = 0; j < i; ++j)
        if (ms[j].index() == ms[i].index() && identity(ms[j]) == identity(ms[i]) &&
            stream_key_of(ms[j]) != stream_key_of(ms[i]))
            return true;
    return false;
}

int64_t t(const Message& m) { return time_of(m).micros_since_midnight; }

Outcome goose_rule(int n, std::span<const Message> ms, size_t i, const std::vector<size_t>& h) {
    const auto& c = std::get<GooseMessage>(ms[i]);
    const GooseMessage* p = h.empty() ? nullptr : &std::get<GooseMessage>(ms[h.back()]);
    const bool changed = p && (c.data1 != p->data1 || c.data2 != p->data2);
    switch (n) {
        case 1:
            if (!p || changed) return Outcome::NotApplicable;
            return ok_if(c.sqnum == p->sqnum + 1);
        case 2:
            if (!changed) return Outcome::NotApplicable;
            return ok_if(c.stnum == p->stnum + 1 && c.sqnum == 0);
        case 3: {
            if (!p) return Outcome::NotApplicable;
            uint64_t mx = 0;
            for (size_t j : h) mx = std::max(mx, std::get<GooseMessage>(ms[j]).stnum);
            return ok_if(!(c.stnum < mx));
        }
        case 4:
            if (!p) return identity_reused_elsewhere(ms, i) ? Outcome::Anomalous : Outcome::NotApplicable;
            return ok_if(c.dm == p->dm && c.sm == p->sm && c.ethertype == p->ethertype && c.appid == p->appid &&
                         c.dataset == p->dataset && c.goid == p->goid);
        case 5:
            return ok_if(c.time.fractional_digits == 6);
        case 6: {
            // G_{i-9..i}: ten packets, nine consecutive gaps.
            if (h.size() < 9) return Outcome::NotApplicable;
            std::vector<int64_t> w;
            for (size_t k = h.size() - 9; k < h.size(); ++k) w.push_back(t(ms[h[k]]));
            w.push_back(t(ms[i]));
            bool flood = true;
            for (size_t k = 1; k < w.size(); ++k)
                if (w[k] - w[k - 1] > 10) flood = false;
            return flood ? Outcome::Anomalous : Outcome::Compliant;
        }
        case 7:
            if (!p) return Outcome::NotApplicable;
            return ok_if(t(ms[i]) - t(ms[h.back()]) <= 10'000'000);
        case 8:
            if (!changed) return Outcome::NotApplicable;
            return (c.stnum == p->stnum && c.sqnum > p->sqnum) ? Outcome::Anomalous : Outcome::Compliant;
    }
    return Outcome::NotApplicable;
}

Outcome sv_rule(int n, std::span<const Message> ms, size_t i, const std::vector<size_t>& h, uint64_t max) {
    const auto& c = std::get<SvMessage>(ms[i]);
    const SvMessage* p = h.empty() ? nullptr : &std::get<SvMessage>(ms[h.back()]);
    const bool wrap = p && c.smpcnt == 0 && p->smpcnt == max;
    switch (n) {
        case 1:
            return ok_if(c.smpcnt <= max);
        case 2:
            if (!p) return Outcome::NotApplicable;
            return ok_if((c.smpcnt > p->smpcnt && c.smpcnt <= max) || wrap);
        case 3:
            if (!p) return Outcome::NotApplicable;
            return ok_if(c.smpcnt >= p->smpcnt || wrap);
        case 4:
            if (!p) return identity_reused_elsewhere(ms, i) ? Outcome::Anomalous : Outcome::NotApplicable;
            return ok_if(c.dm == p->dm && c.sm == p->sm && c.ethertype == p->ethertype && c.appid == p->appid &&
                         c.svid == p->svid);
        case 5:
            return ok_if(c.time.fractional_digits == 3);
        case 6: {
            if (!p) return Outcome::NotApplicable;
            const int64_t d = t(ms[i]) - t(ms[h.back()]);
            return ok_if(200 <= d && d <= 215);
        }
        case 7:
            // S_{i-11..i}
            if (h.size() < 11) return Outcome::NotApplicable;
            return t(ms[i]) - t(ms[h[h.size() - 11]]) <= 2083 ? Outcome::Anomalous : Outcome::Compliant;
        case 8:
            if (!p) return Outcome::NotApplicable;
            return ok_if((p->smpcnt < max && c.smpcnt == p->smpcnt + 1) || wrap);
    }
    return Outcome::NotApplicable;
}

}  // namespace

std::vector<PacketVerdict> oracle_evaluate(std::span<const Message> messages, TrainingLevel level,
                                           SystemFrequency freq) {
    std::vector<PacketVerdict> out;
    const int last = level.level == Level::WT ? 0 : level.level == Level::PT ? 5 : 8;
    for (size_t i = 0; i < messages.size(); ++i) {
        const auto h = history(messages, i);
        const bool goose = messages[i].index() == 0;
        std::vector<RuleVerdict> per_rule;
        for (int n = 1; n <= last; ++n) {
            RuleVerdict v;
            v.rule_id = make_rule(goose ? Protocol::Goose : Protocol::Sv, n);
            v.outcome = goose ? goose_rule(n, messages, i, h) : sv_rule(n, messages, i, h, freq.smpcnt_max());
            per_rule.push_back(v);
        }
        PacketVerdict pv;
        pv.seq_index = seq_index_of(messages[i]);
        pv.anomalous = std::any_of(per_rule.begin(), per_rule.end(),
                                   [](const RuleVerdict& v) { return v.outcome == Outcome::Anomalous; });
        pv.per_rule = std::move(per_rule);
        out.push_back(std::move(pv));
    }
    return out;
}

}  // namespace mcguard
