#pragma once

#include "schedmix/common.hpp"
#include "schedmix/continuum.hpp"
#include "schedmix/degree_graph.hpp"
#include "schedmix/experiments.hpp"
#include "schedmix/fullstack_sim.hpp"
#include "schedmix/game.hpp"
#include "schedmix/mean_field.hpp"
#include "schedmix/state_space.hpp"
#include "schedmix/stochastic_sim.hpp"
