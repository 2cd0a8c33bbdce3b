#pragma once

#include "guardsets/core.hpp"
#include "guardsets/asgraph.hpp"
#include "guardsets/ingest.hpp"
#include "guardsets/hierarchy.hpp"
#include "guardsets/glines.hpp"
#include "guardsets/bwsets.hpp"
#include "guardsets/assignment.hpp"
#include "guardsets/adversary.hpp"
#include "guardsets/pathsec.hpp"
#include "guardsets/synth.hpp"
#include "guardsets/simkit.hpp"
#include "guardsets/config.hpp"
#include "guardsets/export.hpp"
