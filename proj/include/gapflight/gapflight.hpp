#pragma once

#include "gapflight/math.hpp"
#include "gapflight/dynamics.hpp"
#include "gapflight/actuator.hpp"
#include "gapflight/thrust_map.hpp"
#include "gapflight/geometry.hpp"
#include "gapflight/clearance.hpp"
#include "gapflight/track.hpp"
#include "gapflight/sensing.hpp"
#include "gapflight/reward.hpp"
#include "gapflight/randomization.hpp"
#include "gapflight/planner.hpp"
#include "gapflight/controller.hpp"
#include "gapflight/dataset.hpp"
#include "gapflight/environment.hpp"
#include "gapflight/policies.hpp"
#include "gapflight/baseline.hpp"
#include "gapflight/batch.hpp"
#include "gapflight/binding_server.hpp"
#include "gapflight/io/json_io.hpp"
#include "gapflight/io/config.hpp"
