#pragma once

#include <string>
#include <vector>

namespace cpm {

enum class Relation { Align, Tilt, FacingUp, Contain, Touch, Place };

const char* to_string(Relation r);
Relation relation_from_string(const std::string& name);  // ArgumentError on unknown
std::vector<Relation> all_relations();

// One functional correspondence: a spatial relation between a part of the
// static anchor object and a part of the manipulated function object.
struct CorrespondenceSpec {
    Relation relation;
    std::string anchor_part;
    std::string function_part;
};

struct TaskDefinition {
    std::string name;
    std::vector<CorrespondenceSpec> correspondences;
};

// pour: align rims, tilt the body, keep the handle facing away from the
// pour direction. place: contain the head, touch tip to bottom, align the
// bodies. Part roles follow ownership (handles, heads and tips belong to
// the function object).
const TaskDefinition& pour_task();
const TaskDefinition& place_task();
const TaskDefinition& task_by_name(const std::string& name);  // ArgumentError

// Fixed part vocabulary per task family.
const std::vector<std::string>& task_vocabulary(const std::string& task_name);

}  // namespace cpm
