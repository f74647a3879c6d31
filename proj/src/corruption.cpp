#include "rbn/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "rbn/errors.hpp"
#include "rbn/rng.hpp"

namespace rbn {

namespace {

constexpr std::string_view kNames[] = {"mean_shift", "config_starve", "random_flip", "oblivious_product"};

// Random order over [0, n).
std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

bool same(const std::uint8_t* a, const std::uint8_t* b, std::size_t d) { return std::equal(a, a + d, b); }

// Picks the `count` rows with the largest key; ties go to a seeded random order.
std::vector<std::size_t> top_rows(const std::vector<double>& key, std::size_t count, Rng& rng) {
    auto order = shuffled(key.size(), rng);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    order.resize(count);
    return order;
}

void mean_shift(std::vector<std::uint8_t>& bits, std::size_t n, std::size_t d, std::size_t count,
                const CorruptionSpec& spec, std::vector<bool>& planted, Rng& rng) {
    std::vector<std::uint8_t> target = spec.target.empty() ? std::vector<std::uint8_t>(d, 1) : spec.target;
    if (target.size() != d) throw CorruptionError("mean_shift target has the wrong length");
    for (auto b : target)
        if (b > 1) throw CorruptionError("mean_shift target must be 0/1");
    // Rows farthest from the target move the conditional means the most.
    std::vector<double> dist(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) dist[i] += bits[i * d + j] != target[j];
    for (std::size_t i : top_rows(dist, count, rng)) {
        std::uint8_t* row = &bits[i * d];
        if (dist[i] > 0.0) {
            std::copy(target.begin(), target.end(), row);
        } else {
            std::copy(target.begin(), target.end(), row);
            row[rng.below(d)] ^= 1;
        }
        planted[i] = true;
    }
}

void config_starve(const SampleSet& clean, std::vector<std::uint8_t>& bits, std::size_t count,
                   std::vector<bool>& planted, Rng& rng) {
    const std::size_t n = clean.size(), d = clean.dim();
    std::vector<std::uint64_t> counts(clean.table_size(), 0);
    for (auto k : clean.configs()) ++counts[k];
    // Rows realising the rarest configuration come first.
    std::vector<double> key(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t lo = UINT64_MAX;
        for (auto k : clean.configs(i)) lo = std::min(lo, counts[k]);
        key[i] = -static_cast<double>(lo);
    }
    const auto victims = top_rows(key, count, rng);

    // The two most frequent rows (earliest index on ties).
    std::map<std::vector<std::uint8_t>, std::pair<std::size_t, std::size_t>> freq;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = clean.row(i);
        auto [it, fresh] = freq.try_emplace(std::vector<std::uint8_t>(r.begin(), r.end()), 0, i);
        ++it->second.first;
    }
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, const std::vector<std::uint8_t>*>> ranked;
    for (const auto& [row, info] : freq) ranked.push_back({{info.first, info.second}, &row});
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first.first != b.first.first ? a.first.first > b.first.first : a.first.second < b.first.second;
    });

    for (std::size_t i : victims) {
        std::uint8_t* row = &bits[i * d];
        const auto* pick = ranked[0].second;
        if (same(pick->data(), row, d)) {
            if (ranked.size() > 1) {
                pick = ranked[1].second;
            } else {
                row[rng.below(d)] ^= 1;
                planted[i] = true;
                continue;
            }
        }
        std::copy(pick->begin(), pick->end(), row);
        planted[i] = true;
    }
}

template <class Draw>
void resample(std::vector<std::uint8_t>& bits, std::size_t n, std::size_t d, std::size_t count,
              std::vector<bool>& planted, Rng& rng, Draw draw) {
    auto order = shuffled(n, rng);
    std::vector<std::uint8_t> fresh(d);
    for (std::size_t c = 0; c < count; ++c) {
        const std::size_t i = order[c];
        std::uint8_t* row = &bits[i * d];
        // Redraw until the row actually changes.
        for (std::size_t attempt = 0;; ++attempt) {
            draw(row, fresh.data());
            if (!same(fresh.data(), row, d)) break;
            if (attempt == 1000) {
                fresh[rng.below(d)] ^= 1;
                break;
            }
        }
        std::copy(fresh.begin(), fresh.end(), row);
        planted[i] = true;
    }
}

} // namespace

std::string_view name(Strategy s) { return kNames[static_cast<int>(s)]; }

Strategy parse_strategy(std::string_view text) {
    for (int i = 0; i < 4; ++i)
        if (kNames[i] == text) return static_cast<Strategy>(i);
    throw CorruptionError("unknown strategy '" + std::string(text) + "'");
}

nlohmann::json to_json(const CorruptionSpec& s) {
    nlohmann::json j{{"eps", s.eps},
                     {"strategy", std::string(name(s.strategy))},
                     {"seed", s.seed},
                     {"flip_rate", s.flip_rate},
                     {"planted_value", s.planted_value}};
    j["target"] = s.target;
    j["planted_p"] = s.planted_p;
    return j;
}

CorruptionSpec corruption_spec_from_json(const nlohmann::json& j) {
    CorruptionSpec s;
    try {
        if (j.contains("eps")) s.eps = j.at("eps").get<double>();
        if (j.contains("strategy")) s.strategy = parse_strategy(j.at("strategy").get<std::string>());
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("flip_rate")) s.flip_rate = j.at("flip_rate").get<double>();
        if (j.contains("planted_value")) s.planted_value = j.at("planted_value").get<double>();
        if (j.contains("target")) s.target = j.at("target").get<std::vector<std::uint8_t>>();
        if (j.contains("planted_p")) s.planted_p = j.at("planted_p").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad corruption spec: ") + e.what());
    }
    return s;
}

CorruptionResult corrupt(const SampleSet& clean, const BayesNet& net, const CorruptionSpec& spec) {
    if (!(spec.eps >= 0.0 && spec.eps < 0.5)) throw CorruptionError("eps must lie in [0, 1/2)");
    const std::size_t n = clean.size(), d = clean.dim();
    if (d != net.nodes() || clean.table_size() != net.table_size())
        throw StructureError("samples do not match the network");

    CorruptionResult res;
    res.planted.assign(n, false);
    const std::size_t count = static_cast<std::size_t>(std::floor(spec.eps * static_cast<double>(n)));
    if (count == 0) {
        if (spec.eps > 0.0) res.warnings.push_back("eps * N < 1: nothing replaced");
        res.corrupted = clean;
        return res;
    }
    if (d == 0) throw CorruptionError("cannot corrupt zero-width rows");

    Rng rng(derive_seed(spec.seed, 0xc0));
    std::vector<std::uint8_t> bits(clean.bits().begin(), clean.bits().end());
    switch (spec.strategy) {
    case Strategy::mean_shift:
        mean_shift(bits, n, d, count, spec, res.planted, rng);
        break;
    case Strategy::config_starve:
        config_starve(clean, bits, count, res.planted, rng);
        break;
    case Strategy::random_flip: {
        if (!(spec.flip_rate > 0.0 && spec.flip_rate <= 1.0)) throw CorruptionError("flip_rate must lie in (0, 1]");
        resample(bits, n, d, count, res.planted, rng, [&](const std::uint8_t* src, std::uint8_t* dst) {
            for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] ^ static_cast<std::uint8_t>(rng.bernoulli(spec.flip_rate));
        });
        break;
    }
    case Strategy::oblivious_product: {
        std::vector<double> pp = spec.planted_p.empty() ? std::vector<double>(d, spec.planted_value) : spec.planted_p;
        if (pp.size() != d) throw CorruptionError("planted_p has the wrong length");
        for (double v : pp)
            if (!(v >= 0.0 && v <= 1.0)) throw CorruptionError("planted_p entries must lie in [0, 1]");
        resample(bits, n, d, count, res.planted, rng, [&](const std::uint8_t*, std::uint8_t* dst) {
            for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<std::uint8_t>(rng.bernoulli(pp[j]));
        });
        break;
    }
    }
    res.replaced = count;
    res.corrupted = SampleSet(net.structure(), n, std::move(bits));
    return res;
}

} // namespace rbn
