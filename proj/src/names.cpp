#include "ct/names.hpp"

#include "ct/util.hpp"

#include <map>
#include <set>
#include <stdexcept>

namespace ct {

const char* name_style_name(NameStyle style) {
    switch (style) {
        case NameStyle::dnd_human: return "dnd_human";
        case NameStyle::russian: return "russian";
        case NameStyle::french: return "french";
        case NameStyle::german: return "german";
        case NameStyle::korean: return "korean";
        case NameStyle::japanese: return "japanese";
        case NameStyle::place: return "place";
        case NameStyle::organisation: return "organisation";
    }
    return "?";
}

NameStyle name_style_from_name(const std::string& name) {
    for (int i = 0; i <= static_cast<int>(NameStyle::organisation); ++i) {
        if (name == name_style_name(static_cast<NameStyle>(i))) return static_cast<NameStyle>(i);
    }
    throw std::invalid_argument("unknown name style: " + name);
}

const std::vector<NameStyle>& person_styles() {
    static const std::vector<NameStyle> styles = {NameStyle::dnd_human, NameStyle::russian,
                                                  NameStyle::french,    NameStyle::german,
                                                  NameStyle::korean,    NameStyle::japanese};
    return styles;
}

const std::vector<NameStyle>& styles_for_relation(RelationId relation) {
    static const std::vector<NameStyle> place = {NameStyle::place};
    static const std::vector<NameStyle> org = {NameStyle::organisation};
    static const std::vector<NameStyle> org_or_place = {NameStyle::organisation, NameStyle::place};
    switch (relation) {
        case RelationId::P19:
        case RelationId::P20:
        case RelationId::P27:
        case RelationId::P101:
            return person_styles();
        case RelationId::P1376:
            return place;
        case RelationId::P740:
            return org;
        case RelationId::P495:
            return org_or_place;
    }
    return person_styles();
}

namespace {

struct StyleInventory {
    std::vector<std::string> first_parts;
    std::vector<std::string> first_ends;
    std::vector<std::string> last_parts;
    std::vector<std::string> last_ends;
    const char* joiner = " ";
};

const StyleInventory& inventory(NameStyle style) {
    static const std::map<NameStyle, StyleInventory> inv = {
        {NameStyle::dnd_human,
         {{"Bal", "Ser", "Olre", "Vor", "Kel", "Thal", "Mor", "Gar", "Fen", "Dra"},
          {"o", "ok", "a", "in", "us", "eth", "ar", ""},
          {"Wind", "Hell", "Storm", "Iron", "Nuv", "Ash", "Grim", "Oak", "Ember", "Frost"},
          {"hair", "spirit", "rome", "brand", "shade", "born", "weaver", "fall"}}},
        {NameStyle::russian,
         {{"Dmi", "Vla", "Ser", "Ana", "Iva", "Niko", "Ole", "Mik"},
          {"tri", "dik", "gei", "toli", "n", "lai", "g", "hail"},
          {"Volko", "Sokolo", "Orlo", "Smirno", "Kuznetso", "Petro", "Morozo", "Lebede"},
          {"v", "va", "vsky", "ff"}}},
        {NameStyle::french,
         {{"Je", "Lu", "Ad", "Mar", "Ber", "Ol", "Pas", "Ale"},
          {"an", "cien", "olphe", "got", "nard", "ivier", "cal", "xandre"},
          {"Beau", "Du", "Le", "Mont", "Fon", "Char", "Trud", "Bonn"},
          {"mont", "pont", "clerc", "aine", "taine", "pentier", "eau", "aire"}}},
        {NameStyle::german,
         {{"Wil", "Fried", "Hein", "Gus", "Wer", "Kon", "Lud", "Ott"},
          {"helm", "rich", "rich", "tav", "ner", "rad", "wig", "o"},
          {"Schwarz", "Stein", "Eisen", "Wein", "Hag", "Berg", "Stahl", "Wald"},
          {"mann", "berg", "hardt", "el", "er", "feld", "bach", "stein"}}},
        {NameStyle::korean,
         {{"Kim", "Lee", "Park", "Cho", "Han", "Seo", "Kye", "Ha"},
          {""},
          {"Ji", "Min", "Hye", "Seok", "Song", "Eun", "Young", "Soo"},
          {"-su", "-ho", "-jin", "-min", "-young", "-hee"}}},
        {NameStyle::japanese,
         {{"Hira", "Naka", "Yama", "Tana", "Koba", "Mats", "Fuji", "Saka"},
          {"shima", "mura", "moto", "ka", "yashi", "umoto", "wara", "gami"},
          {"Hide", "Aki", "Haru", "Ken", "Yuk", "Nobu", "Taka", "Masa"},
          {"yoshi", "ra", "to", "ji", "io", "nori", "shi", "hiro"}}},
        {NameStyle::place,
         {{"Lima", "San", "Vel", "Nor", "Kara", "Bren", "Tor", "Osta"},
          {"naga", "Salcos", "dora", "wick", "gan", "holm", "mara", "via"},
          {},
          {},
          ""}},
        {NameStyle::organisation,
         {{"Sonar", "Vel", "Nor", "Apex", "Quill", "Baro", "Zephy", "Kolek"},
          {"", "trix", "din", "", "on", "que", "r", "ta"},
          {"Kollektiv", "Group", "Ensemble", "Syndicate", "Works", "Union", "Assembly", "Guild"},
          {}}},
    };
    return inv.at(style);
}

}  // namespace

SyntheticNameGenerator::SyntheticNameGenerator(std::uint64_t seed) : rng_(seed) {}

std::string SyntheticNameGenerator::pick(const std::vector<std::string>& options) {
    if (options.empty()) return "";
    return options[static_cast<std::size_t>(util::uniform_below(rng_, options.size()))];
}

std::string SyntheticNameGenerator::generate(NameStyle style) {
    const StyleInventory& inv = inventory(style);
    std::string first = pick(inv.first_parts) + pick(inv.first_ends);
    std::string last = pick(inv.last_parts) + pick(inv.last_ends);
    if (last.empty()) return first;
    return first + inv.joiner + last;
}

std::vector<SyntheticSubject> SyntheticNameGenerator::generate_batch(
    const std::vector<NameStyle>& styles, int n, const EntityChecker& entities,
    int retries_per_name) {
    if (styles.empty()) {
        throw std::invalid_argument("generate_batch: no styles given");
    }
    std::vector<SyntheticSubject> out;
    std::set<std::string> used;
    for (int i = 0; i < n; ++i) {
        const NameStyle style = styles[static_cast<std::size_t>(i) % styles.size()];
        bool accepted = false;
        for (int attempt = 0; attempt < retries_per_name; ++attempt) {
            std::string name = generate(style);
            if (used.contains(name)) continue;        // batch deduplication
            if (entities.exists(name)) continue;      // real-entity collision
            used.insert(name);
            out.push_back(SyntheticSubject{std::move(name), style, true});
            accepted = true;
            break;
        }
        if (!accepted) {
            throw std::runtime_error("generate_batch: retry budget exhausted for style " +
                                     std::string(name_style_name(style)) + " after " +
                                     std::to_string(retries_per_name) + " attempts");
        }
    }
    return out;
}

}  // namespace ct
