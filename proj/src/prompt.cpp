#include "cascade/prompt.hpp"

#include <openssl/sha.h>

#include <array>
#include <cstdio>

#include "json.hpp"

namespace cascade {
namespace {

std::vector<std::string> label_strings(const CandidateSet& candidates, const LabelSet& labels) {
  if (candidates.empty()) throw ValidationError("candidate set is empty");
  std::vector<std::string> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates.entries()) out.push_back(labels[c.label]);
  return out;
}

std::string noun_str(std::string_view noun) { return std::string(noun); }

std::string options_question(std::string_view noun, const std::vector<std::string>& options) {
  const auto n = noun_str(noun);
  return "Question: What is the " + n + " name? Remember select only one " + n +
         " name from the options and response with the " + n + " name only. Options: " + format_options(options);
}

std::string listing_question(std::string_view noun, const std::vector<std::string>& options) {
  const auto n = noun_str(noun);
  return "Please examine the " + n + " image and identify the most suitable " + n +
         " name corresponding to the image content from the list of " + n + " names below. Remember select only one " +
         n + " name from the list, and response with the " + n + " name ONLY. Available " + n +
         " names: " + format_options(options);
}

}  // namespace

std::size_t PromptBundle::image_count() const {
  std::size_t n = 0;
  for (const auto& m : messages)
    for (const auto& p : m.parts)
      if (p.kind == ContentPart::Kind::kImage) ++n;
  return n;
}

std::string format_options(const std::vector<std::string>& labels) {
  std::string out = "[";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ", ";
    out += labels[i];
  }
  return out + "]";
}

PromptBundle render_zero_shot(const CandidateSet& candidates, const LabelSet& labels, std::string_view item_image_ref,
                              PromptTemplate template_id, std::string_view noun) {
  if (is_few_shot(template_id))
    throw ValidationError("template '" + std::string(to_string(template_id)) + "' is not a zero-shot template");
  PromptBundle bundle;
  bundle.template_id = template_id;
  bundle.candidate_labels = label_strings(candidates, labels);
  const auto text = template_id == PromptTemplate::kListing ? listing_question(noun, bundle.candidate_labels)
                                                            : options_question(noun, bundle.candidate_labels);
  bundle.messages.push_back(
      {"user", {ContentPart::image(std::string(item_image_ref)), ContentPart::text(text)}});
  return bundle;
}

PromptBundle render_few_shot(const CandidateSet& candidates, const LabelSet& labels, const ExemplarBank& exemplars,
                             std::string_view item_image_ref, PromptTemplate template_id, std::string_view noun) {
  if (!is_few_shot(template_id))
    throw ValidationError("template '" + std::string(to_string(template_id)) + "' is not a few-shot template");
  PromptBundle bundle;
  bundle.template_id = template_id;
  bundle.candidate_labels = label_strings(candidates, labels);
  const auto n = noun_str(noun);

  Message msg{"user", {}};
  for (const auto& c : candidates.entries()) {
    const auto& refs = exemplars.refs(c.label);
    if (refs.empty() || refs.size() < exemplars.shots_per_class())
      throw ValidationError("no exemplar for candidate label '" + labels[c.label] + "'");
    for (const auto& ref : refs) {
      msg.parts.push_back(ContentPart::image(ref));
      const auto answer = "Answer: " + labels[c.label];
      msg.parts.push_back(ContentPart::text(template_id == PromptTemplate::kFewShotQuestion
                                                ? "Question: What is the " + n + " name? " + answer
                                                : answer));
    }
  }
  msg.parts.push_back(ContentPart::image(std::string(item_image_ref)));
  msg.parts.push_back(ContentPart::text("Question: What is the " + n +
                                        " name? Options: " + format_options(bundle.candidate_labels) + " Answer:"));
  bundle.messages.push_back(std::move(msg));
  return bundle;
}

PromptBundle render_explanation(const CandidateSet& candidates, const LabelSet& labels,
                                std::string_view item_image_ref, std::string_view noun) {
  PromptBundle bundle;
  bundle.template_id = PromptTemplate::kOptions;
  bundle.explanation = true;
  bundle.candidate_labels = label_strings(candidates, labels);
  const auto n = noun_str(noun);
  std::string text = "Question: What is the " + n + " name? ";
  if (bundle.candidate_labels.size() == 1) {
    text += "Reply with the " + n + " name from the options on the first line, then explain which visible features "
            "of the image support it.";
  } else {
    text += "Select only one " + n + " name from the options. Reply with the chosen " + n +
            " name on the first line, then explain why it is preferred over the other options.";
  }
  text += " Options: " + format_options(bundle.candidate_labels);
  bundle.messages.push_back({"user", {ContentPart::image(std::string(item_image_ref)), ContentPart::text(text)}});
  return bundle;
}

std::string canonical_bundle_text(const PromptBundle& bundle) {
  nlohmann::ordered_json doc;
  doc["template"] = to_string(bundle.template_id);
  doc["explanation"] = bundle.explanation;
  doc["candidates"] = bundle.candidate_labels;
  auto& messages = doc["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : bundle.messages) {
    nlohmann::ordered_json parts = nlohmann::ordered_json::array();
    for (const auto& p : m.parts)
      parts.push_back({{p.kind == ContentPart::Kind::kText ? "text" : "image", p.value}});
    messages.push_back({{"role", m.role}, {"parts", std::move(parts)}});
  }
  return doc.dump();
}

std::string prompt_digest(const PromptBundle& bundle) {
  const auto text = canonical_bundle_text(bundle);
  std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), md.data());
  std::string hex;
  hex.reserve(md.size() * 2);
  for (unsigned char b : md) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  return hex;
}

}  // namespace cascade
