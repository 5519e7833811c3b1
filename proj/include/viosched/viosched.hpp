#pragma once

#include "viosched/agility.hpp"
#include "viosched/audit.hpp"
#include "viosched/config.hpp"
#include "viosched/cost_model.hpp"
#include "viosched/cpu_monitor.hpp"
#include "viosched/errors.hpp"
#include "viosched/hash.hpp"
#include "viosched/policy.hpp"
#include "viosched/profiles.hpp"
#include "viosched/sim.hpp"
#include "viosched/stress.hpp"
#include "viosched/trace_io.hpp"
#include "viosched/types.hpp"
