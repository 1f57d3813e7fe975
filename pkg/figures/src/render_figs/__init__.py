"""Render nvmotion CSV artifact sets into publication-style figures."""

from .recipes import FIGURE_IDS, FigureRecipe, RecipeError, recipe_for, render

__all__ = ["FIGURE_IDS", "FigureRecipe", "RecipeError", "recipe_for", "render"]
