#include "cshover/core_types.hpp"

namespace cshover {

std::string_view class_abbreviation(ClassId id) {
  switch (id) {
    case 1: return "neu";
    case 2: return "epi";
    case 3: return "lym";
    case 4: return "pla";
    case 5: return "eos";
    case 6: return "con";
    default: return "bg";
  }
}

void validate_class_map(const ClassMap& classes) {
  for (auto c : classes.data()) {
    if (c > kNumClasses) {
      throw InvalidArgument("class id out of range");
    }
  }
}

void validate_label_pair(const InstanceMap& instances, const ClassMap& classes) {
  if (!instances.same_extent(classes)) {
    throw InvalidArgument("instance and class maps differ in shape");
  }
  validate_class_map(classes);
  for (std::size_t i = 0; i < instances.pixel_count(); ++i) {
    if (instances[i] > 0 && classes[i] == 0) {
      throw InvalidArgument("labelled pixel has background class");
    }
  }
}

}  // namespace cshover
