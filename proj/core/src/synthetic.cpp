#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <unordered_set>
#include <vector>

#include "comve/data.hpp"
#include "comve/rng.hpp"

namespace comve {

namespace {

// ---- the world ----
// Nouns carry a size class (1 small .. 4 huge); containers a capacity class.
// An item fits a container iff size < capacity. The other families are plain
// category memberships: only foods are eaten, only drinks drunk, only
// vehicles ridden, only clothes worn.

struct SizedNoun {
    std::string word;
    int size;
};

struct Container {
    std::string word;
    int capacity;
};

struct World {
    std::vector<SizedNoun> items; // union of the four size tiers
    std::vector<Container> containers;
    std::vector<std::string> foods, drinks, stuff, vehicles, clothes, places, meals, subjects;
};

const std::vector<std::string>& base_foods() {
    static const std::vector<std::string> v = {
        "bread", "cake", "soup",  "rice",  "cheese",   "apple", "pasta", "stew",
        "pie",   "toast", "salad", "ham",   "pancake",  "corn",  "muffin", "porridge"};
    return v;
}
const std::vector<std::string>& base_drinks() {
    static const std::vector<std::string> v = {"water",    "juice", "tea",  "coffee",
                                               "milk", "lemonade", "cocoa", "cider"};
    return v;
}
const std::vector<std::string>& base_stuff() {
    static const std::vector<std::string> v = {"rock", "hammer", "brick",  "wire",
                                               "soap", "chalk",  "sponge", "nail",
                                               "magnet", "candle", "crayon", "peg"};
    return v;
}
const std::vector<SizedNoun>& base_items() {
    // Interleaved by size so any truncated prefix keeps all four tiers.
    static const std::vector<SizedNoun> v = {
        {"coin", 1},   {"book", 2},   {"sofa", 3},     {"tractor", 4},
        {"key", 1},    {"shoe", 2},   {"piano", 3},    {"elephant", 4},
        {"ring", 1},   {"lamp", 2},   {"fridge", 3},   {"whale", 4},
        {"button", 1}, {"kettle", 2}, {"wardrobe", 3}, {"truck", 4},
        {"marble", 1}, {"pillow", 2}, {"desk", 3},     {"airplane", 4},
        {"bead", 1},   {"helmet", 2}, {"bathtub", 3},  {"sailboat", 4},
        {"pin", 1},    {"radio", 2},  {"bookcase", 3}, {"crane", 4},
        {"stamp", 1},  {"clock", 2},  {"mattress", 3}, {"bulldozer", 4},
        {"pebble", 1}, {"teapot", 2}, {"dresser", 3},  {"token", 1},
        {"mirror", 2}, {"bench", 3}};
    return v;
}
const std::vector<Container>& base_containers() {
    // Capacity tops out at 4: every container must leave some item too big.
    static const std::vector<Container> v = {
        {"pocket", 2}, {"box", 3},      {"closet", 4},  {"purse", 2},
        {"drawer", 3}, {"shed", 4},     {"envelope", 2},{"suitcase", 3},
        {"trailer", 4},{"tin", 2},      {"crate", 3},   {"cellar", 4},
        {"barn", 4},   {"garage", 4},   {"warehouse", 4},{"hangar", 4}};
    return v;
}
const std::vector<std::string>& base_vehicles() {
    static const std::vector<std::string> v = {"bus",   "tram",  "train",   "ferry",
                                               "taxi", "scooter", "subway", "minibus"};
    return v;
}
const std::vector<std::string>& base_clothes() {
    static const std::vector<std::string> v = {"hat",     "coat", "scarf",  "jacket",
                                               "sweater", "cap",  "poncho", "vest"};
    return v;
}
const std::vector<std::string>& base_places() {
    static const std::vector<std::string> v = {"school",  "market", "office", "station",
                                               "park", "library", "museum", "harbor"};
    return v;
}
const std::vector<std::string>& base_subjects() {
    static const std::vector<std::string> v = {
        "tom",       "anna",       "the man",     "the woman",  "the boy",    "the girl",
        "the farmer", "the nurse", "the teacher", "the driver", "my uncle",   "my aunt"};
    return v;
}

/// Deterministic CVCV pseudo-nouns for worlds larger than the base lists.
std::string pseudo_noun(size_t index) {
    static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t",
                                   "v", "z"};
    static const char* vowels[] = {"a", "e", "i", "o", "u"};
    const size_t n_on = 14, n_vo = 5;
    std::string w;
    size_t x = index;
    w += onsets[x % n_on];
    x /= n_on;
    w += vowels[x % n_vo];
    x /= n_vo;
    w += onsets[x % n_on];
    x /= n_on;
    w += vowels[x % n_vo];
    x /= n_vo;
    if (x > 0) w += std::to_string(x);
    return w;
}

template <typename T>
void truncate_to(std::vector<T>& v, size_t keep, size_t floor) {
    if (v.size() > std::max(keep, floor)) v.resize(std::max(keep, floor));
}

World build_world(size_t vocab_words) {
    World w;
    w.items = base_items();
    w.containers = base_containers();
    w.foods = base_foods();
    w.drinks = base_drinks();
    w.stuff = base_stuff();
    w.vehicles = base_vehicles();
    w.clothes = base_clothes();
    w.places = base_places();
    w.meals = {"breakfast", "lunch", "dinner"};
    w.subjects = base_subjects();

    const size_t base_total = w.items.size() + w.containers.size() + w.foods.size() +
                              w.drinks.size() + w.stuff.size() + w.vehicles.size() +
                              w.clothes.size();
    if (vocab_words == 0) vocab_words = base_total;

    if (vocab_words < base_total) {
        const double ratio = static_cast<double>(vocab_words) / static_cast<double>(base_total);
        auto scaled = [&](size_t n) {
            return static_cast<size_t>(std::ceil(ratio * static_cast<double>(n)));
        };
        truncate_to(w.items, scaled(base_items().size()), 8);
        truncate_to(w.containers, scaled(base_containers().size()), 4);
        truncate_to(w.foods, scaled(base_foods().size()), 4);
        truncate_to(w.drinks, scaled(base_drinks().size()), 3);
        truncate_to(w.stuff, scaled(base_stuff().size()), 4);
        truncate_to(w.vehicles, scaled(base_vehicles().size()), 3);
        truncate_to(w.clothes, scaled(base_clothes().size()), 3);
    } else if (vocab_words > base_total) {
        std::unordered_set<std::string> taken;
        for (const SizedNoun& n : w.items) taken.insert(n.word);
        for (const Container& c : w.containers) taken.insert(c.word);
        for (const auto* list : {&w.foods, &w.drinks, &w.stuff, &w.vehicles, &w.clothes})
            for (const std::string& s : *list) taken.insert(s);
        size_t extra = vocab_words - base_total;
        size_t index = 0, round = 0;
        while (extra > 0) {
            std::string word = pseudo_noun(index++);
            if (!taken.insert(word).second) continue;
            switch (round % 5) {
                case 0: w.items.push_back({word, static_cast<int>(1 + (round / 5) % 4)}); break;
                case 1: w.foods.push_back(word); break;
                case 2: w.stuff.push_back(word); break;
                case 3: w.drinks.push_back(word); break;
                case 4: w.clothes.push_back(word); break;
            }
            ++round;
            --extra;
        }
    }
    return w;
}

// ---- sampling helpers ----

/// Zipf-flavored pick: usually from the common head of the list, sometimes
/// from the rare tail, so dev sets contain undertrained nouns.
template <typename T>
const T& pick_skewed(const std::vector<T>& list, Rng& rng) {
    const size_t head = std::max<size_t>(1, (list.size() * 3) / 5);
    if (list.size() <= 2 || rng.uniform() < 0.75)
        return list[rng.below(head)];
    return list[head + rng.below(list.size() - head)];
}

template <typename T>
const T& pick_uniform(const std::vector<T>& list, Rng& rng) {
    return list[rng.below(list.size())];
}

enum class Family { fit, eat, drink, ride, wear };

struct Draft {
    std::string sensible, nonsense;
    std::string bad_word;              // the rule-violating filler
    std::string good_word;             // its sensible counterpart
    std::vector<std::string> good_pool; // other valid fillers for the slot
    Family family = Family::fit;
    std::string context_word; // container / place / meal used by reasons
};

std::string fit_statement(const std::string& subj, const std::string& verb,
                          const std::string& item, const std::string& container) {
    return subj + " " + verb + " the " + item + " in the " + container;
}

Draft draft_fit(const World& w, Rng& rng) {
    static const std::vector<std::string> verbs = {"put", "kept", "hid"};
    Draft d;
    d.family = Family::fit;
    const Container& box = pick_skewed(w.containers, rng);
    d.context_word = box.word;

    std::vector<std::string> fits, too_big;
    std::vector<std::string> just_fits, just_too_big;
    for (const SizedNoun& n : w.items) {
        if (n.size < box.capacity) {
            fits.push_back(n.word);
            if (n.size == box.capacity - 1) just_fits.push_back(n.word);
        } else {
            too_big.push_back(n.word);
            if (n.size == box.capacity) just_too_big.push_back(n.word);
        }
    }
    // Boundary cases (size one off the capacity) need finer knowledge; plant
    // a share of them so models cannot rely on extremes alone.
    const bool tricky = rng.uniform() < 0.3;
    const std::vector<std::string>& good_src =
        tricky && !just_fits.empty() ? just_fits : fits;
    const std::vector<std::string>& bad_src =
        tricky && !just_too_big.empty() ? just_too_big : too_big;
    d.good_word = pick_skewed(good_src, rng);
    d.bad_word = pick_skewed(bad_src, rng);
    d.good_pool = fits;

    const std::string& subj = pick_uniform(w.subjects, rng);
    const std::string& verb = pick_uniform(verbs, rng);
    d.sensible = fit_statement(subj, verb, d.good_word, box.word);
    d.nonsense = fit_statement(subj, verb, d.bad_word, box.word);
    return d;
}

Draft draft_eat(const World& w, Rng& rng) {
    Draft d;
    d.family = Family::eat;
    d.context_word = pick_uniform(w.meals, rng);
    d.good_word = pick_skewed(w.foods, rng);
    d.bad_word = pick_skewed(w.stuff, rng);
    d.good_pool = w.foods;
    const std::string& subj = pick_uniform(w.subjects, rng);
    switch (rng.below(3)) {
        case 0:
            d.sensible = subj + " ate the " + d.good_word + " for " + d.context_word;
            d.nonsense = subj + " ate the " + d.bad_word + " for " + d.context_word;
            break;
        case 1:
            d.sensible = "yesterday " + subj + " ate the " + d.good_word + " for " +
                         d.context_word;
            d.nonsense = "yesterday " + subj + " ate the " + d.bad_word + " for " +
                         d.context_word;
            break;
        default:
            d.sensible = subj + " ate the " + d.good_word + " for " + d.context_word +
                         " at home";
            d.nonsense = subj + " ate the " + d.bad_word + " for " + d.context_word +
                         " at home";
            break;
    }
    return d;
}

Draft draft_drink(const World& w, Rng& rng) {
    Draft d;
    d.family = Family::drink;
    d.good_word = pick_skewed(w.drinks, rng);
    d.bad_word = pick_skewed(w.stuff, rng);
    d.good_pool = w.drinks;
    const std::string& subj = pick_uniform(w.subjects, rng);
    switch (rng.below(3)) {
        case 0:
            d.sensible = subj + " drank a cup of " + d.good_word;
            d.nonsense = subj + " drank a cup of " + d.bad_word;
            break;
        case 1:
            d.sensible = subj + " drank a cup of " + d.good_word + " this morning";
            d.nonsense = subj + " drank a cup of " + d.bad_word + " this morning";
            break;
        default:
            d.sensible = "yesterday " + subj + " drank a glass of " + d.good_word;
            d.nonsense = "yesterday " + subj + " drank a glass of " + d.bad_word;
            break;
    }
    return d;
}

Draft draft_ride(const World& w, Rng& rng) {
    Draft d;
    d.family = Family::ride;
    d.context_word = pick_uniform(w.places, rng);
    d.good_word = pick_skewed(w.vehicles, rng);
    d.bad_word = rng.bernoulli(0.5) ? pick_skewed(w.clothes, rng) : pick_skewed(w.stuff, rng);
    d.good_pool = w.vehicles;
    const std::string& subj = pick_uniform(w.subjects, rng);
    const std::string tail = rng.bernoulli(0.3) ? " today" : "";
    d.sensible = subj + " rode the " + d.good_word + " to the " + d.context_word + tail;
    d.nonsense = subj + " rode the " + d.bad_word + " to the " + d.context_word + tail;
    return d;
}

Draft draft_wear(const World& w, Rng& rng) {
    Draft d;
    d.family = Family::wear;
    d.context_word = pick_uniform(w.places, rng);
    d.good_word = pick_skewed(w.clothes, rng);
    std::vector<std::string> big_things;
    for (const SizedNoun& n : w.items)
        if (n.size >= 3) big_things.push_back(n.word);
    d.bad_word = rng.bernoulli(0.5) ? pick_skewed(big_things, rng)
                                    : pick_skewed(w.vehicles, rng);
    d.good_pool = w.clothes;
    const std::string& subj = pick_uniform(w.subjects, rng);
    const bool warm = rng.bernoulli(0.3);
    const std::string adj = warm ? "warm " : "";
    d.sensible = subj + " wore a " + adj + d.good_word + " to the " + d.context_word;
    d.nonsense = subj + " wore a " + adj + d.bad_word + " to the " + d.context_word;
    return d;
}

std::string correct_reason(Family family, const std::string& bad,
                           const std::string& context) {
    switch (family) {
        case Family::fit:
            return "the " + bad + " cannot fit in the " + context;
        case Family::eat:
            return "nobody can eat a " + bad;
        case Family::drink:
            return "you cannot drink a " + bad;
        case Family::ride:
            return "a " + bad + " is not a vehicle";
        case Family::wear:
            return "a " + bad + " is not clothing";
    }
    return "";
}

/// A true-but-irrelevant reason: the correct template of a different family
/// applied to the same noun.
std::string wrong_frame_reason(Family family, const std::string& bad,
                               const std::string& context, Rng& rng) {
    std::vector<Family> others;
    for (Family f : {Family::fit, Family::eat, Family::drink, Family::ride, Family::wear})
        if (f != family) others.push_back(f);
    Family chosen = others[rng.below(others.size())];
    if (chosen == Family::fit)
        return "the " + bad + " cannot fit in a pocket";
    return correct_reason(chosen, bad, context);
}

std::string wrong_noun_reason(Family family, const Draft& d, const World& w, Rng& rng) {
    // Same frame, different noun: a noun that never occurs in the statement.
    std::string other = d.bad_word;
    for (int attempt = 0; attempt < 64 && other == d.bad_word; ++attempt) {
        switch (family) {
            case Family::fit: other = pick_skewed(w.items, rng).word; break;
            case Family::eat:
            case Family::drink: other = pick_skewed(w.stuff, rng); break;
            case Family::ride: other = pick_skewed(w.clothes, rng); break;
            case Family::wear: other = pick_skewed(w.vehicles, rng); break;
        }
    }
    return correct_reason(family, other, d.context_word);
}

} // namespace

DatasetSplit generate_synthetic(size_t n, uint64_t seed, size_t vocab_words,
                                double hint_signal_strength, const std::string& split_name) {
    if (n < 1) throw InputError("generate_synthetic: n must be >= 1");
    if (hint_signal_strength < 0.0 || hint_signal_strength > 1.0)
        throw InputError("generate_synthetic: hint_signal_strength must be in [0, 1], got " +
                         std::to_string(hint_signal_strength));
    const World world = build_world(vocab_words);
    Rng base(mix_seed(seed, 0x5F17));

    DatasetSplit split;
    split.name = split_name;
    split.instances.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Rng rng = base.fork(i);
        Draft d;
        switch (rng.below(5)) {
            case 0: d = draft_fit(world, rng); break;
            case 1: d = draft_eat(world, rng); break;
            case 2: d = draft_drink(world, rng); break;
            case 3: d = draft_ride(world, rng); break;
            default: d = draft_wear(world, rng); break;
        }

        ComveInstance inst;
        inst.id = "syn-" + split_name + "-" + std::to_string(i);
        inst.provenance = Provenance::synthetic;
        inst.nonsense_index = rng.bernoulli(0.5) ? 1 : 0;
        if (inst.nonsense_index == 0) {
            inst.s1 = d.nonsense;
            inst.s2 = d.sensible;
        } else {
            inst.s1 = d.sensible;
            inst.s2 = d.nonsense;
        }

        const bool hint_needed = rng.uniform() < hint_signal_strength;
        std::vector<std::string> options(3);
        int correct_slot = static_cast<int>(rng.below(3));
        if (hint_needed) {
            // Three equally plausible "use X instead" reasons; only the hint
            // sentence reveals which replacement actually appeared.
            std::vector<std::string> alternatives;
            for (const std::string& candidate : d.good_pool)
                if (candidate != d.good_word) alternatives.push_back(candidate);
            if (alternatives.size() < 2) {
                alternatives.push_back(d.good_word + "s");
                alternatives.push_back("fresh " + d.good_word);
            }
            size_t a1 = rng.below(alternatives.size());
            size_t a2 = a1;
            while (a2 == a1 && alternatives.size() > 1) a2 = rng.below(alternatives.size());
            auto suggestion = [&](const std::string& w) {
                return "the " + w + " should replace the " + d.bad_word;
            };
            std::array<std::string, 3> texts = {suggestion(d.good_word),
                                                suggestion(alternatives[a1]),
                                                suggestion(alternatives[a2])};
            options[static_cast<size_t>(correct_slot)] = texts[0];
            size_t cursor = 1;
            for (size_t slot = 0; slot < 3; ++slot) {
                if (static_cast<int>(slot) == correct_slot) continue;
                options[slot] = texts[cursor++];
            }
        } else {
            std::string correct = correct_reason(d.family, d.bad_word, d.context_word);
            std::string frame_foil = wrong_frame_reason(d.family, d.bad_word, d.context_word, rng);
            std::string noun_foil = wrong_noun_reason(d.family, d, world, rng);
            options[static_cast<size_t>(correct_slot)] = correct;
            std::array<std::string, 2> foils = {noun_foil, frame_foil};
            if (rng.bernoulli(0.5)) std::swap(foils[0], foils[1]);
            size_t cursor = 0;
            for (size_t slot = 0; slot < 3; ++slot) {
                if (static_cast<int>(slot) == correct_slot) continue;
                options[slot] = foils[cursor++];
            }
        }
        inst.options = std::move(options);
        inst.reason_index = correct_slot;
        split.instances.push_back(std::move(inst));
    }
    return split;
}

} // namespace comve
