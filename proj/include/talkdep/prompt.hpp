#pragma once

#include "talkdep/common.hpp"

#include <map>
#include <set>
#include <string>
#include <string_view>

namespace talkdep {

enum class PromptRole { patient, therapist, assessor, judge };

std::string_view to_string(PromptRole role);
PromptRole prompt_role_from_string(std::string_view s);

// A versioned prompt body with single-brace named placeholders ("{name}");
// "{{" and "}}" render as literal braces.
struct PromptTemplate {
  std::string template_id;
  PromptRole role = PromptRole::patient;
  std::string body;
  int version = 1;

  // Placeholder names referenced in body. Throws parse_error on an
  // unterminated or malformed placeholder.
  std::set<std::string> placeholders() const;

  bool operator==(const PromptTemplate&) const = default;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

// Deterministic substitution. Throws Error(invalid_argument) on a missing
// binding, and in strict mode also on a binding the body never references.
std::string render(const PromptTemplate& tmpl, const Bindings& bindings, bool strict = true);

// Template file format: "key: value" header lines (template_id, role,
// version), one blank line, then the body.
PromptTemplate parse_template_file(std::string_view text);
std::string dump_template_file(const PromptTemplate& tmpl);

// The prompts the pipeline needs, one per step.
struct TemplateSet {
  PromptTemplate patient_generation;
  PromptTemplate patient_simulator;
  PromptTemplate therapist;
  PromptTemplate assessor;
  PromptTemplate judge;

  // Project-authored defaults shipped under data/templates.
  static const TemplateSet& defaults();
  // Loads <dir>/<template_id>.tmpl for each slot, falling back to the
  // shipped default for files that are absent.
  static TemplateSet load_dir(const std::string& dir);

  // template_id -> version, for run manifests.
  Json versions() const;
};

}  // namespace talkdep
