#include <array>
#include <cstdio>
#include <map>
#include <random>

#include "modeswitch/corpus.hpp"

// Templated dialogues over the seven task domains. Every system response is a
// function of the user utterance right before it, so a correct model can
// memorize the corpus from one turn of context.

namespace modeswitch {
namespace {

using Vars = std::map<std::string, std::string>;
using Rng = std::mt19937_64;

struct ActSpec {
  std::string act;
  std::vector<std::pair<std::string, std::string>> slots;  // slot name -> variable
};

struct Utt {
  std::string text;
  std::vector<ActSpec> acts;
};

struct DomainTemplates {
  std::string name;
  std::vector<std::vector<std::string>> choices;  // one list of values per drawn variable
  std::vector<std::string> choice_keys;
  std::map<std::string, std::map<std::string, std::string>> derived;  // key -> (value -> derived)
  std::map<std::string, std::string> derived_from;                    // derived key -> source key
  Utt hint_user;
  std::string hint_normal;
  std::string hint_transition;
  Utt open_user, open_system;
  Utt follow_user, follow_system;
  Utt close_user, close_system;
  std::string close_transition;
  Utt final_user, final_system;
  std::vector<std::pair<std::string, std::string>> cc_answers;
};

const std::vector<std::pair<std::string, std::string>>& generic_chitchat() {
  static const std::vector<std::pair<std::string, std::string>> pool = {
      {"i had a long day at work today .", "i am sorry to hear that . i hope you can relax tonight ."},
      {"i just finished reading a great book .", "that is wonderful ! what was it about ?"},
      {"the weather is really nice today .", "yes , it is perfect for a walk outside ."},
      {"i am thinking about learning to play the guitar .",
       "that is a great idea ! music is so relaxing ."},
      {"my cat knocked over my coffee this morning .", "oh no ! cats can be so naughty ."},
      {"i watched a funny movie last night .", "i love funny movies . they always cheer me up ."},
      {"i am so nervous about my exam next week .",
       "you will do great , just stay calm and prepare well ."},
      {"i started running every morning .", "that is impressive ! running is good for your health ."},
  };
  return pool;
}

std::vector<DomainTemplates> build_domains() {
  std::vector<DomainTemplates> ds;

  {
    DomainTemplates d;
    d.name = "restaurant";
    d.choice_keys = {"food", "area", "people"};
    d.choices = {{"indian", "italian", "chinese"}, {"north", "centre", "south"}, {"two", "four", "six"}};
    d.derived_from = {{"name", "food"}, {"phone", "food"}};
    d.derived["name"] = {{"indian", "the golden curry"}, {"italian", "la margherita"},
                         {"chinese", "the lucky star"}};
    d.derived["phone"] = {{"indian", "01223329432"}, {"italian", "01223315232"},
                          {"chinese", "01223244277"}};
    d.hint_user = {"my friend told me to try some {food} food . she said i would like it .", {}};
    d.hint_normal = "sounds exciting ! i hope you enjoy it .";
    d.hint_transition = "by the way , i can help you find a {food} restaurant .";
    d.open_user = {"i am looking for a {food} restaurant in the {area} .",
                   {{"inform", {{"food", "food"}, {"area", "area"}}}}};
    d.open_system = {"{name} serves {food} food in the {area} . shall i book a table ?",
                     {{"recommend", {{"name", "name"}}}}};
    d.follow_user = {"yes , please book a table at {name} for {people} people .",
                     {{"inform", {{"name", "name"}, {"people", "people"}}}}};
    d.follow_system = {"i have booked a table at {name} for {people} people .",
                       {{"book", {{"name", "name"}, {"people", "people"}}}}};
    d.close_user = {"can you give me the phone number of {name} ?", {{"request", {{"name", "name"}}}}};
    d.close_system = {"sure , the phone number of {name} is {phone} .",
                      {{"inform", {{"phone", "phone"}}}}};
    d.close_transition = "are you going with your friends ?";
    d.final_user = {"great , that is all for the restaurant . thank you .", {{"thank", {}}}};
    d.final_system = {"you are welcome . enjoy your meal !", {{"bye", {}}}};
    d.cc_answers = {{"yes , it is my birthday tomorrow .",
                     "happy birthday ! i hope you have a wonderful dinner ."},
                    {"no , i am taking my parents out .", "that is very kind of you . they will love it ."}};
    ds.push_back(std::move(d));
  }
  {
    DomainTemplates d;
    d.name = "hotel";
    d.choice_keys = {"area", "nights"};
    d.choices = {{"north", "east", "west"}, {"two", "three", "five"}};
    d.derived_from = {{"name", "area"}, {"address", "area"}, {"parking", "area"}};
    d.derived["parking"] = {{"north", "yes"}, {"east", "yes"}, {"west", "yes"}};
    d.derived["name"] = {{"north", "acorn guest house"}, {"east", "the alpha hotel"},
                         {"west", "the hamilton lodge"}};
    d.derived["address"] = {{"north", "154 chesterton road"}, {"east", "63 milton road"},
                            {"west", "156 chesterton road"}};
    d.hint_user = {"my parents are coming to visit the {area} of the city next month .", {}};
    d.hint_normal = "how lovely , they will enjoy it .";
    d.hint_transition = "if you want , i could help you find a hotel in the {area} for them .";
    d.open_user = {"i need a hotel in the {area} with free parking .",
                   {{"inform", {{"area", "area"}, {"parking", "parking"}}}}};
    d.open_system = {"{name} is a nice hotel in the {area} with free parking .",
                     {{"recommend", {{"name", "name"}}}}};
    d.follow_user = {"please book {name} for {nights} nights .",
                     {{"inform", {{"name", "name"}, {"stay", "nights"}}}}};
    d.follow_system = {"your room at {name} is booked for {nights} nights .",
                       {{"book", {{"name", "name"}, {"stay", "nights"}}}}};
    d.close_user = {"what is the address of {name} ?", {{"request", {{"name", "name"}}}}};
    d.close_system = {"{name} is located at {address} .", {{"inform", {{"address", "address"}}}}};
    d.close_transition = "is this trip for business or pleasure ?";
    d.final_user = {"perfect , that is all for the hotel . thanks .", {{"thank", {}}}};
    d.final_system = {"you are welcome . have a pleasant stay !", {{"bye", {}}}};
    d.cc_answers = {{"it is for my sister's wedding .",
                     "congratulations to your sister ! weddings are so much fun ."},
                    {"i have a job interview in town .", "good luck with your interview !"}};
    ds.push_back(std::move(d));
  }
  {
    DomainTemplates d;
    d.name = "attraction";
    d.choice_keys = {"type", "area"};
    d.choices = {{"museum", "park", "theatre"}, {"centre", "south", "east"}};
    d.derived_from = {{"name", "type"}, {"fee", "type"}, {"phone", "type"}};
    d.derived["name"] = {{"museum", "the fitzwilliam"}, {"park", "cherry hinton park"},
                         {"theatre", "the adc theatre"}};
    d.derived["fee"] = {{"museum", "free"}, {"park", "free"}, {"theatre", "five pounds"}};
    d.derived["phone"] = {{"museum", "01223332900"}, {"park", "01223446104"},
                          {"theatre", "01223300085"}};
    d.hint_user = {"i have always wanted to see a famous {type} in this city .", {}};
    d.hint_normal = "that sounds like a great plan .";
    d.hint_transition = "i can suggest a {type} for you to visit if you like .";
    d.open_user = {"can you recommend a {type} in the {area} ?",
                   {{"inform", {{"type", "type"}, {"area", "area"}}}}};
    d.open_system = {"i recommend {name} , a lovely {type} in the {area} .",
                     {{"recommend", {{"name", "name"}}}}};
    d.follow_user = {"what is the entrance fee for {name} ?", {{"request", {{"name", "name"}}}}};
    d.follow_system = {"the entrance fee for {name} is {fee} .", {{"inform", {{"fee", "fee"}}}}};
    d.close_user = {"could i get the phone number for {name} ?", {{"request", {{"name", "name"}}}}};
    d.close_system = {"the phone number for {name} is {phone} .", {{"inform", {{"phone", "phone"}}}}};
    d.close_transition = "what kind of places do you usually like to visit ?";
    d.final_user = {"thanks , that is all for the attraction .", {{"thank", {}}}};
    d.final_system = {"you are welcome . have fun exploring !", {{"bye", {}}}};
    d.cc_answers = {{"i really enjoy old buildings and art .", "art is wonderful . it tells so many stories ."},
                    {"i like quiet places with lots of trees .", "nature is the best place to relax ."}};
    ds.push_back(std::move(d));
  }
  {
    DomainTemplates d;
    d.name = "train";
    d.choice_keys = {"destination", "day", "people"};
    d.choices = {{"cambridge", "london kings cross", "stansted airport"},
                 {"monday", "friday", "sunday"},
                 {"two", "three", "four"}};
    d.derived_from = {{"time", "destination"}, {"duration", "destination"}};
    d.derived["time"] = {{"cambridge", "09:15"}, {"london kings cross", "11:40"},
                         {"stansted airport", "07:30"}};
    d.derived["duration"] = {{"cambridge", "51 minutes"}, {"london kings cross", "79 minutes"},
                             {"stansted airport", "28 minutes"}};
    d.hint_user = {"my family and i will visit {destination} this weekend to see my new school .", {}};
    d.hint_normal = "i see .";
    d.hint_transition = "if you want , i could help you book a train ticket to {destination} .";
    d.open_user = {"i need a train to {destination} on {day} .",
                   {{"inform", {{"destination", "destination"}, {"day", "day"}}}}};
    d.open_system = {"there is a train to {destination} on {day} leaving at {time} .",
                     {{"offer", {{"leaveat", "time"}}}}};
    d.follow_user = {"please book {people} tickets on the {time} train to {destination} .",
                     {{"inform", {{"people", "people"}, {"leaveat", "time"}}}}};
    d.follow_system = {"i have booked {people} tickets on the {time} train to {destination} .",
                       {{"book", {{"people", "people"}}}}};
    d.close_user = {"how long is the journey to {destination} ?",
                    {{"request", {{"destination", "destination"}}}}};
    d.close_system = {"the journey to {destination} takes {duration} .",
                      {{"inform", {{"duration", "duration"}}}}};
    d.close_transition = "are you visiting someone there ?";
    d.final_user = {"good , that is all for the train . thank you .", {{"thank", {}}}};
    d.final_system = {"you are welcome . have a safe journey !", {{"bye", {}}}};
    d.cc_answers = {{"yes , my grandmother lives there .", "how nice ! she will be happy to see you ."},
                    {"no , i am going to a concert .", "that sounds like a lot of fun !"}};
    ds.push_back(std::move(d));
  }
  {
    DomainTemplates d;
    d.name = "taxi";
    d.choice_keys = {"destination", "leave"};
    d.choices = {{"the train station", "the city museum", "the airport"}, {"10:00", "17:30", "08:15"}};
    d.derived_from = {{"car", "destination"}, {"phone", "destination"}};
    d.derived["car"] = {{"the train station", "red toyota"}, {"the city museum", "black skoda"},
                        {"the airport", "white volvo"}};
    d.derived["phone"] = {{"the train station", "07218068540"}, {"the city museum", "07954621043"},
                          {"the airport", "07812356984"}};
    d.hint_user = {"i have to get to {destination} early tomorrow morning .", {}};
    d.hint_normal = "that is really early !";
    d.hint_transition = "i can book a taxi to {destination} for you if you want .";
    d.open_user = {"i need a taxi to {destination} at {leave} .",
                   {{"inform", {{"destination", "destination"}, {"leaveat", "leave"}}}}};
    d.open_system = {"i have booked a {car} to {destination} at {leave} .",
                     {{"book", {{"car", "car"}}}}};
    d.follow_user = {"what is the contact number for the {car} ?", {{"request", {{"car", "car"}}}}};
    d.follow_system = {"the contact number for the {car} is {phone} .",
                       {{"inform", {{"phone", "phone"}}}}};
    d.close_user = {"please confirm the {car} will arrive at {leave} .",
                    {{"request", {{"car", "car"}, {"leaveat", "leave"}}}}};
    d.close_system = {"yes , the {car} will arrive at {leave} .", {{"confirm", {{"leaveat", "leave"}}}}};
    d.close_transition = "are you excited about your trip ?";
    d.final_user = {"okay , that is all for the taxi . thank you .", {{"thank", {}}}};
    d.final_system = {"you are welcome . have a nice ride !", {{"bye", {}}}};
    d.cc_answers = {{"yes , i am flying to see my best friend .", "that is great ! have a wonderful time ."},
                    {"not really , it is a work trip .", "i hope the work goes smoothly ."}};
    ds.push_back(std::move(d));
  }
  {
    DomainTemplates d;
    d.name = "police";
    d.choice_keys = {"station"};
    d.choices = {{"parkside"}};
    d.derived_from = {{"post", "station"}, {"phone", "station"}};
    d.derived["post"] = {{"parkside", "CB11JG"}};
    d.derived["phone"] = {{"parkside", "01223358966"}};
    d.hint_user = {"someone took my bike near parkside yesterday .", {}};
    d.hint_normal = "oh no , that is terrible .";
    d.hint_transition = "i can give you the post code of the parkside police station if you need it .";
    d.open_user = {"do you know where the {station} police station is ?",
                   {{"inform", {{"name", "station"}}}}};
    d.open_system = {"hello , i can provide the post code for you ; it is {post} .",
                     {{"inform", {{"post", "post"}}}}};
    d.follow_user = {"what is the phone number of the {station} police station ?",
                     {{"request", {{"name", "station"}}}}};
    d.follow_system = {"the phone number is {phone} .", {{"inform", {{"phone", "phone"}}}}};
    d.close_user = {"can you give me the address of the {station} police station ?",
                    {{"request", {{"name", "station"}}}}};
    d.close_system = {"the address is {station} , cambridge .", {{"inform", {{"address", "station"}}}}};
    d.close_transition = "what happened to you ?";
    d.final_user = {"alright , that is all for the police . thanks .", {{"thank", {}}}};
    d.final_system = {"you are welcome . stay safe !", {{"bye", {}}}};
    d.cc_answers = {{"i lost my wallet .", "don't worry , the police will look into it ."},
                    {"my car was broken into .", "that must be so stressful . i am sorry ."}};
    ds.push_back(std::move(d));
  }
  {
    DomainTemplates d;
    d.name = "hospital";
    d.choice_keys = {"department"};
    d.choices = {{"cardiology", "neurology", "paediatrics"}};
    d.derived_from = {{"floor", "department"}, {"phone", "department"}, {"open", "department"}};
    d.derived["open"] = {{"cardiology", "yes"}, {"neurology", "yes"}, {"paediatrics", "yes"}};
    d.derived["floor"] = {{"cardiology", "second"}, {"neurology", "third"}, {"paediatrics", "first"}};
    d.derived["phone"] = {{"cardiology", "01223256233"}, {"neurology", "01223216348"},
                          {"paediatrics", "01223217392"}};
    d.hint_user = {"my little brother is sick and his doctor sent him to {department} .", {}};
    d.hint_normal = "i am sorry to hear that .";
    d.hint_transition = "i can find the {department} department at the hospital for you .";
    d.open_user = {"i am looking for the {department} department at the hospital .",
                   {{"inform", {{"department", "department"}}}}};
    d.open_system = {"the {department} department is on the {floor} floor .",
                     {{"inform", {{"floor", "floor"}}}}};
    d.follow_user = {"what is the phone number for {department} ?",
                     {{"request", {{"department", "department"}}}}};
    d.follow_system = {"the phone number for {department} is {phone} .",
                       {{"inform", {{"phone", "phone"}}}}};
    d.close_user = {"is the {department} department open at the weekend ?",
                    {{"request", {{"department", "department"}}}}};
    d.close_system = {"yes , the {department} department is open every day .",
                      {{"inform", {{"open", "open"}}}}};
    d.close_transition = "how are you feeling today ?";
    d.final_user = {"fine , that is all for the hospital . thanks .", {{"thank", {}}}};
    d.final_system = {"you are welcome . get well soon !", {{"bye", {}}}};
    d.cc_answers = {{"i am a little worried about my heart .",
                     "i hope everything is fine . try to stay positive ."},
                    {"i feel tired but okay .", "please take some rest and drink water ."}};
    ds.push_back(std::move(d));
  }
  return ds;
}

std::string fill(const std::string& tmpl, const Vars& vars) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      out += vars.at(tmpl.substr(i + 1, close - i - 1));
      i = close;
    } else {
      out.push_back(tmpl[i]);
    }
  }
  return out;
}

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// One variant index drives every variable of the domain, so each domain has
// at most three distinct instantiations and held-out splits reuse them.
Vars draw(const DomainTemplates& d, Rng& rng) {
  Vars v;
  const std::size_t variant = pick(rng, 3);
  for (std::size_t k = 0; k < d.choice_keys.size(); ++k) {
    v[d.choice_keys[k]] = d.choices[k][variant % d.choices[k].size()];
  }
  for (const auto& [key, source] : d.derived_from) v[key] = d.derived.at(key).at(v.at(source));
  return v;
}

DialogueTurn make_turn(Speaker speaker, Mode mode, const std::string& domain, const Utt& u,
                       const Vars& vars) {
  DialogueTurn t;
  t.speaker = speaker;
  t.mode = mode;
  t.text = fill(u.text, vars);
  if (mode == Mode::taskoriented) {
    for (const auto& spec : u.acts) {
      DialogueAct act;
      act.domain = domain;
      act.act = spec.act;
      for (const auto& [slot, var] : spec.slots) act.slots.emplace_back(slot, vars.at(var));
      t.acts.push_back(std::move(act));
    }
  }
  return t;
}

void chit_exchange(std::vector<DialogueTurn>& turns, const std::string& user, const std::string& sys) {
  turns.push_back(make_turn(Speaker::user, Mode::chitchat, "", {user, {}}, {}));
  turns.push_back(make_turn(Speaker::system, Mode::chitchat, "", {sys, {}}, {}));
}

void task_exchange(std::vector<DialogueTurn>& turns, const DomainTemplates& d, const Utt& user,
                   const Utt& sys, const Vars& vars) {
  turns.push_back(make_turn(Speaker::user, Mode::taskoriented, d.name, user, vars));
  turns.push_back(make_turn(Speaker::system, Mode::taskoriented, d.name, sys, vars));
}

}  // namespace

std::vector<Dialogue> gen_synthetic_corpus(std::uint64_t seed, std::size_t n) {
  if (n == 0) throw std::invalid_argument("gen_synthetic_corpus: n must be >= 1");
  static const std::vector<DomainTemplates> domains = build_domains();
  const auto& chat = generic_chitchat();
  Rng rng(seed);

  std::vector<Dialogue> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Dialogue d;
    char id[48];
    std::snprintf(id, sizeof id, "syn-%llu-%04zu", static_cast<unsigned long long>(seed), i);
    d.id = id;
    d.split = i % 10 == 8 ? Split::valid : i % 10 == 9 ? Split::test : Split::train;

    const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    d.kind = r < 0.4 ? DialogueKind::prepended : r < 0.8 ? DialogueKind::appended : DialogueKind::plain;

    const auto& a = domains[pick(rng, domains.size())];
    const Vars va = draw(a, rng);
    const bool two_domains = pick(rng, 3) == 0;
    const DomainTemplates* b = &domains[pick(rng, domains.size())];
    if (b->name == a.name) b = &domains[(static_cast<std::size_t>(b - domains.data()) + 1) % domains.size()];
    const Vars vb = draw(*b, rng);

    auto& turns = d.turns;
    switch (d.kind) {
      case DialogueKind::prepended: {
        const auto& g = chat[pick(rng, chat.size())];
        chit_exchange(turns, g.first, g.second);
        turns.push_back(make_turn(Speaker::user, Mode::chitchat, "", a.hint_user, va));
        auto sys = make_turn(Speaker::system, Mode::chitchat, "", {a.hint_normal, {}}, va);
        sys.is_transition_turn = true;
        sys.transition_sentence = fill(a.hint_transition, va);
        turns.push_back(std::move(sys));
        task_exchange(turns, a, a.open_user, a.open_system, va);
        d.domains.insert(a.name);
        if (two_domains) {
          task_exchange(turns, *b, b->open_user, b->open_system, vb);
          d.domains.insert(b->name);
        } else {
          task_exchange(turns, a, a.follow_user, a.follow_system, va);
        }
        break;
      }
      case DialogueKind::appended: {
        task_exchange(turns, a, a.open_user, a.open_system, va);
        d.domains.insert(a.name);
        const DomainTemplates* last = &a;
        const Vars* vlast = &va;
        if (two_domains) {
          task_exchange(turns, *b, b->open_user, b->open_system, vb);
          d.domains.insert(b->name);
          last = b;
          vlast = &vb;
        } else if (pick(rng, 2) == 0) {
          task_exchange(turns, a, a.follow_user, a.follow_system, va);
        }
        turns.push_back(
            make_turn(Speaker::user, Mode::taskoriented, last->name, last->close_user, *vlast));
        auto sys = make_turn(Speaker::system, Mode::taskoriented, last->name, last->close_system, *vlast);
        sys.is_transition_turn = true;
        sys.transition_sentence = last->close_transition;
        turns.push_back(std::move(sys));
        const auto& ans = last->cc_answers[pick(rng, last->cc_answers.size())];
        chit_exchange(turns, ans.first, ans.second);
        if (pick(rng, 2) == 0) {
          const auto& g = chat[pick(rng, chat.size())];
          chit_exchange(turns, g.first, g.second);
        }
        break;
      }
      case DialogueKind::plain: {
        if (pick(rng, 2) == 0) {
          task_exchange(turns, a, a.open_user, a.open_system, va);
          task_exchange(turns, a, a.follow_user, a.follow_system, va);
          task_exchange(turns, a, a.final_user, a.final_system, va);
          d.domains.insert(a.name);
        } else {
          std::array<std::size_t, 3> idx{};
          idx[0] = pick(rng, chat.size());
          idx[1] = (idx[0] + 1 + pick(rng, chat.size() - 1)) % chat.size();
          do {
            idx[2] = pick(rng, chat.size());
          } while (idx[2] == idx[0] || idx[2] == idx[1]);
          for (auto k : idx) chit_exchange(turns, chat[k].first, chat[k].second);
        }
        break;
      }
    }
    check_dialogue(d);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace modeswitch
