#pragma once

// Random GOOSE / SV sequences mixing compliant transitions with every kind
// of violation the rules look for. Shared by unit tests and the acceptance
// binary.

#include <random>
#include <string>
#include <vector>

#include "mcguard/msgmodel.hpp"

namespace mcguard::testing {

class CorpusGen {
public:
    explicit CorpusGen(uint64_t seed) : rng_(seed) {}

    uint64_t uniform(uint64_t lo, uint64_t hi) {
        return std::uniform_int_distribution<uint64_t>(lo, hi)(rng_);
    }
    bool chance(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }

    static MacAddress mac(uint8_t a, uint8_t b, uint8_t c) {
        MacAddress m;
        m.octets = {a, b, c, 0x01, 0x00, 0x00};
        return m;
    }

    std::vector<Message> goose(size_t length, uint64_t max_stnum = 20) {
        struct S {
            GooseMessage last;
            bool started = false;
        };
        const size_t nstreams = uniform(1, 3);
        std::vector<S> streams(nstreams);
        for (size_t k = 0; k < nstreams; ++k) {
            auto& g = streams[k].last;
            g.dm = mac(0x01, 0x0C, 0xCD);
            g.dm.octets[5] = static_cast<uint8_t>(k);
            g.sm = mac(0x00, 0x00, 0x00);
            g.sm.octets[5] = static_cast<uint8_t>(uniform(0, 1));
            g.appid = static_cast<uint32_t>(uniform(1, 3));
            g.dataset = "LD0/LLN0$DS" + std::to_string(uniform(0, 1));
            g.goid = "GO" + std::to_string(uniform(0, 2));
            g.stnum = uniform(1, max_stnum);
            g.sqnum = uniform(0, 5);
            g.data1 = static_cast<uint8_t>(uniform(0, 1));
        }
        int64_t now = static_cast<int64_t>(uniform(36'000'000'000, 37'000'000'000));
        std::vector<Message> out;
        for (size_t i = 0; i < length; ++i) {
            auto& st = streams[uniform(0, nstreams - 1)];
            GooseMessage g = st.last;
            const uint64_t pick = uniform(0, 99);
            if (!st.started || pick < 40) {
                g.sqnum += 1;
            } else if (pick < 60) {
                g.stnum += 1;
                g.sqnum = 0;
                if (chance(0.5)) g.data1 ^= 1; else g.data2 ^= 1;
            } else if (pick < 66) {
                g.sqnum = uniform(0, 8);
            } else if (pick < 72) {
                g.stnum = uniform(0, max_stnum);
            } else if (pick < 78) {
                if (chance(0.5)) g.data1 ^= 1; else g.data2 ^= 1;
                if (chance(0.5)) g.sqnum += 1;
                if (chance(0.3)) g.stnum += 1;
            } else if (pick < 82) {
                if (chance(0.5)) g.goid = "GO" + std::to_string(uniform(0, 2));
                else g.dataset = "LD0/LLN0$DS" + std::to_string(uniform(0, 1));
            } else if (pick < 86) {
                // a publisher moving to another key: same identity, new stream
                g.appid = static_cast<uint32_t>(uniform(1, 6));
                g.sm.octets[5] = static_cast<uint8_t>(uniform(0, 3));
            } else if (pick < 89) {
                g.ethertype = chance(0.5) ? kGooseEthertype : 0x88B9;
            } else {
                g.sqnum += 1;
            }
            // time step
            const uint64_t tp = uniform(0, 99);
            if (tp < 45) now += static_cast<int64_t>(uniform(0, 12));
            else if (tp < 85) now += static_cast<int64_t>(uniform(100, 2'000'000));
            else if (tp < 93) now += static_cast<int64_t>(uniform(9'999'990, 10'000'010));
            else if (tp < 97) now += static_cast<int64_t>(uniform(10'000'001, 12'000'000));
            else now -= static_cast<int64_t>(uniform(0, 20));
            const int digits = chance(0.9) ? 6 : static_cast<int>(uniform(0, 5));
            g.time = Timestamp::from_micros(now, digits);
            g.seq_index = i;
            st.last = g;
            st.started = true;
            out.emplace_back(g);
        }
        return out;
    }

    std::vector<Message> sv(size_t length, uint64_t smpcnt_max = 4799) {
        struct S {
            SvMessage last;
            bool started = false;
        };
        const size_t nstreams = uniform(1, 3);
        std::vector<S> streams(nstreams);
        for (size_t k = 0; k < nstreams; ++k) {
            auto& s = streams[k].last;
            s.dm = mac(0x01, 0x0C, 0xCD);
            s.dm.octets[3] = 0x04;
            s.dm.octets[5] = static_cast<uint8_t>(k);
            s.sm = mac(0x00, 0x00, 0x00);
            s.appid = static_cast<uint32_t>(0x4000 + uniform(0, 2));
            s.svid = "MU" + std::to_string(uniform(0, 2));
            // start near the wrap point now and then
            s.smpcnt = chance(0.3) ? smpcnt_max - uniform(0, 3) : uniform(0, smpcnt_max);
        }
        int64_t now = static_cast<int64_t>(uniform(36'000'000'000, 37'000'000'000));
        std::vector<Message> out;
        for (size_t i = 0; i < length; ++i) {
            auto& st = streams[uniform(0, nstreams - 1)];
            SvMessage s = st.last;
            const uint64_t pick = uniform(0, 99);
            if (!st.started) {
            } else if (pick < 60) {
                s.smpcnt = s.smpcnt >= smpcnt_max ? 0 : s.smpcnt + 1;
            } else if (pick < 66) {
                s.smpcnt = s.smpcnt + uniform(2, 5);
            } else if (pick < 72) {
                s.smpcnt = s.smpcnt - std::min<uint64_t>(s.smpcnt, uniform(0, 3));
            } else if (pick < 76) {
                s.smpcnt = smpcnt_max + uniform(0, 3);
            } else if (pick < 80) {
                s.smpcnt = chance(0.5) ? 0 : smpcnt_max;
            } else if (pick < 84) {
                s.svid = "MU" + std::to_string(uniform(0, 2));
            } else if (pick < 88) {
                s.appid = static_cast<uint32_t>(0x4000 + uniform(0, 5));
            } else if (pick < 90) {
                s.ethertype = chance(0.5) ? kSvEthertype : 0x88BB;
            } else {
                s.smpcnt = s.smpcnt >= smpcnt_max ? 0 : s.smpcnt + 1;
            }
            const uint64_t tp = uniform(0, 99);
            if (tp < 40) now += static_cast<int64_t>(uniform(195, 220));
            else if (tp < 80) now += static_cast<int64_t>(uniform(0, 250));
            else if (tp < 95) now += static_cast<int64_t>(uniform(150, 3'000));
            else now -= static_cast<int64_t>(uniform(0, 50));
            const int digits = chance(0.9) ? 3 : static_cast<int>(uniform(0, 6));
            s.time = Timestamp::from_micros(now, digits);
            s.seq_index = i;
            st.last = s;
            st.started = true;
            out.emplace_back(s);
        }
        return out;
    }

    // GOOSE and SV interleaved in one list.
    std::vector<Message> mixed(size_t length) {
        auto g = goose(length / 2);
        auto s = sv(length - length / 2);
        std::vector<Message> out;
        size_t a = 0, b = 0;
        while (a < g.size() || b < s.size()) {
            if (b >= s.size() || (a < g.size() && chance(0.5))) out.push_back(g[a++]);
            else out.push_back(s[b++]);
        }
        for (size_t i = 0; i < out.size(); ++i) set_seq_index(out[i], i);
        return out;
    }

private:
    std::mt19937_64 rng_;
};

}  // namespace mcguard::testing
