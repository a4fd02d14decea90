#include "talkdep/prompt.hpp"

#include "talkdep/embedded.hpp"
#include "talkdep/store.hpp"

#include <cctype>
#include <charconv>
#include <functional>
#include <sstream>

namespace talkdep {

namespace {

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Walks the body once, calling on_text for literal runs and on_placeholder
// for each {name}.
void scan(std::string_view body, const std::function<void(std::string_view)>& on_text,
          const std::function<void(std::string_view)>& on_placeholder) {
  std::size_t i = 0;
  std::size_t run_start = 0;
  auto flush = [&](std::size_t end) {
    if (end > run_start) on_text(body.substr(run_start, end - run_start));
  };
  while (i < body.size()) {
    const char c = body[i];
    if (c == '{' && i + 1 < body.size() && body[i + 1] == '{') {
      flush(i);
      on_text("{");
      i += 2;
      run_start = i;
    } else if (c == '}' && i + 1 < body.size() && body[i + 1] == '}') {
      flush(i);
      on_text("}");
      i += 2;
      run_start = i;
    } else if (c == '{') {
      std::size_t j = i + 1;
      if (j >= body.size() || !is_name_start(body[j])) {
        throw Error(ErrorCode::parse_error, "malformed placeholder at offset " + std::to_string(i));
      }
      while (j < body.size() && is_name_char(body[j])) ++j;
      if (j >= body.size() || body[j] != '}') {
        throw Error(ErrorCode::parse_error, "unterminated placeholder at offset " + std::to_string(i));
      }
      flush(i);
      on_placeholder(body.substr(i + 1, j - i - 1));
      i = j + 1;
      run_start = i;
    } else if (c == '}') {
      throw Error(ErrorCode::parse_error, "unbalanced '}' at offset " + std::to_string(i));
    } else {
      ++i;
    }
  }
  flush(body.size());
}

}  // namespace

std::string_view to_string(PromptRole role) {
  switch (role) {
    case PromptRole::patient: return "patient";
    case PromptRole::therapist: return "therapist";
    case PromptRole::assessor: return "assessor";
    case PromptRole::judge: return "judge";
  }
  return "patient";
}

PromptRole prompt_role_from_string(std::string_view s) {
  if (s == "patient") return PromptRole::patient;
  if (s == "therapist") return PromptRole::therapist;
  if (s == "assessor") return PromptRole::assessor;
  if (s == "judge") return PromptRole::judge;
  throw Error(ErrorCode::parse_error, "unknown template role '" + std::string(s) + "'");
}

std::set<std::string> PromptTemplate::placeholders() const {
  std::set<std::string> names;
  scan(body, [](std::string_view) {}, [&](std::string_view name) { names.emplace(name); });
  return names;
}

std::string render(const PromptTemplate& tmpl, const Bindings& bindings, bool strict) {
  const auto names = tmpl.placeholders();
  for (const auto& name : names) {
    if (bindings.find(name) == bindings.end()) {
      throw Error(ErrorCode::invalid_argument,
                  "template '" + tmpl.template_id + "' has no binding for {" + name + "}");
    }
  }
  if (strict) {
    for (const auto& [name, _] : bindings) {
      if (names.count(name) == 0) {
        throw Error(ErrorCode::invalid_argument,
                    "binding '" + name + "' is not a placeholder of template '" + tmpl.template_id + "'");
      }
    }
  }
  std::string out;
  out.reserve(tmpl.body.size() * 2);
  scan(
      tmpl.body, [&](std::string_view text) { out.append(text); },
      [&](std::string_view name) { out.append(bindings.find(name)->second); });
  return out;
}

PromptTemplate parse_template_file(std::string_view text) {
  PromptTemplate t;
  bool have_id = false, have_role = false, have_version = false;
  std::size_t pos = 0;
  while (true) {
    const std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) {
      throw Error(ErrorCode::parse_error, "template header is not followed by a blank line");
    }
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    if (line.empty()) break;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorCode::parse_error, "bad template header line '" + std::string(line) + "'");
    }
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key == "template_id") {
      t.template_id = value;
      have_id = true;
    } else if (key == "role") {
      t.role = prompt_role_from_string(value);
      have_role = true;
    } else if (key == "version") {
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), t.version);
      if (ec != std::errc() || ptr != value.data() + value.size() || t.version < 1) {
        throw Error(ErrorCode::parse_error, "bad template version '" + value + "'");
      }
      have_version = true;
    } else {
      throw Error(ErrorCode::parse_error, "unknown template header key '" + key + "'");
    }
  }
  if (!have_id || !have_role || !have_version) {
    throw Error(ErrorCode::parse_error, "template header needs template_id, role and version");
  }
  t.body = std::string(text.substr(pos));
  t.placeholders();  // validates syntax
  return t;
}

std::string dump_template_file(const PromptTemplate& tmpl) {
  std::ostringstream out;
  out << "template_id: " << tmpl.template_id << "\nrole: " << to_string(tmpl.role)
      << "\nversion: " << tmpl.version << "\n\n"
      << tmpl.body;
  return out.str();
}

namespace {

PromptTemplate shipped(std::string_view id) {
  auto text = embedded::find("templates/" + std::string(id) + ".tmpl");
  if (!text) throw Error(ErrorCode::not_found, "shipped template '" + std::string(id) + "' missing");
  return parse_template_file(*text);
}

}  // namespace

const TemplateSet& TemplateSet::defaults() {
  static const TemplateSet set{shipped("patient_generation"), shipped("patient_simulator"),
                               shipped("therapist"), shipped("assessor"), shipped("judge")};
  return set;
}

TemplateSet TemplateSet::load_dir(const std::string& dir) {
  TemplateSet set = defaults();
  for (PromptTemplate* slot : {&set.patient_generation, &set.patient_simulator, &set.therapist,
                               &set.assessor, &set.judge}) {
    const fs::path path = fs::path(dir) / (slot->template_id + ".tmpl");
    if (fs::exists(path)) *slot = parse_template_file(read_file(path));
  }
  return set;
}

Json TemplateSet::versions() const {
  Json j = Json::object();
  for (const PromptTemplate* t : {&patient_generation, &patient_simulator, &therapist, &assessor, &judge}) {
    j[t->template_id] = t->version;
  }
  return j;
}

}  // namespace talkdep
