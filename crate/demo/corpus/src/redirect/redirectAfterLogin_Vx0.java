public void redirectAfterLogin(HttpServletRequest request, HttpServletResponse response) throws IOException {
    String next = request.getParameter("next");
    if (next == null || !ALLOWED_TARGETS.contains(next)) {
        response.sendRedirect("/home");
        return;
    }
    response.sendRedirect(next);
}
