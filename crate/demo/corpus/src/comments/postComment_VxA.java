public ResponseEntity<String> postComment(@RequestParam String postId, @RequestParam String body) {
    commentRepository.save(new Comment(postId, body));
    return ResponseEntity.ok("<p>" + body + "</p>");
}
