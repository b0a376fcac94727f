#pragma once

#include "rgtd/closed_form.hpp"
#include "rgtd/dynamics.hpp"
#include "rgtd/environments.hpp"
#include "rgtd/error.hpp"
#include "rgtd/harness.hpp"
#include "rgtd/io.hpp"
#include "rgtd/learners.hpp"
#include "rgtd/linalg.hpp"
#include "rgtd/mdp.hpp"
#include "rgtd/rng.hpp"
#include "rgtd/stats.hpp"
